#include "storyweaver/corpus.hpp"

#include <fstream>
#include <sstream>

#include "storyweaver/dialogue.hpp"
#include "storyweaver/error.hpp"

namespace storyweaver {

std::size_t Corpus::eligible_turns() const noexcept {
    std::size_t n = 0;
    for (const auto& d : dialogues)
        if (d.size() > 1) n += d.size() - 1;
    return n;
}

std::vector<std::string> Corpus::utterances() const {
    std::vector<std::string> out;
    for (const auto& d : dialogues) out.insert(out.end(), d.begin(), d.end());
    return out;
}

Corpus parse_corpus(std::string_view text) {
    Corpus corpus;
    Dialogue current;
    auto flush = [&] {
        if (!current.empty()) corpus.dialogues.push_back(std::move(current));
        current.clear();
    };
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(pos, end - pos));
        if (line.empty()) {
            flush();
        } else if (line.front() != '#') {
            current.emplace_back(line);
        }
        pos = end + 1;
    }
    flush();
    return corpus;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Corpus read_corpus(const std::filesystem::path& path) { return parse_corpus(read_text_file(path)); }

}  // namespace storyweaver
