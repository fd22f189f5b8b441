#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace storyweaver {

using Dialogue = std::vector<std::string>;

/// One utterance per line; blank lines separate dialogues; '#' lines are comments.
struct Corpus {
    std::vector<Dialogue> dialogues;

    /// Positions t that have a following utterance, summed over dialogues.
    std::size_t eligible_turns() const noexcept;
    std::vector<std::string> utterances() const;
};

Corpus parse_corpus(std::string_view text);
Corpus read_corpus(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace storyweaver
