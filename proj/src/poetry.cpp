#include "storyweaver/poetry.hpp"

#include <algorithm>
#include <cctype>

#include "storyweaver/corpus.hpp"
#include "storyweaver/error.hpp"
#include "storyweaver/text.hpp"

namespace storyweaver {
namespace {

bool has_stress(std::string_view phoneme) {
    return !phoneme.empty() && std::isdigit(static_cast<unsigned char>(phoneme.back()));
}

std::string strip_stress(std::string_view phoneme) {
    while (has_stress(phoneme)) phoneme.remove_suffix(1);
    return std::string(phoneme);
}

// Initial phoneme verbatim, remaining phonemes without stress digits.
std::string tail_key(const Phonemes& tail) {
    std::string key;
    for (std::size_t i = 0; i < tail.size(); ++i) {
        if (i > 0) key.push_back(' ');
        key += i == 0 ? tail[i] : strip_stress(tail[i]);
    }
    return key;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        fn(line);
        pos = end + 1;
    }
}

constexpr std::string_view kDefaultNoun = "story";

bool contains_token(std::string_view text, std::string_view word) {
    const auto tokens = tokenize(text);
    return std::find(tokens.begin(), tokens.end(), word) != tokens.end();
}

}  // namespace

Phonemes rhyme_tail(std::span<const std::string> phonemes) {
    std::optional<std::size_t> primary;
    std::optional<std::size_t> any;
    for (std::size_t i = 0; i < phonemes.size(); ++i) {
        if (!has_stress(phonemes[i])) continue;
        any = i;
        if (phonemes[i].back() == '1') primary = i;
    }
    const auto start = primary ? primary : any;
    if (!start) return {};
    return Phonemes(phonemes.begin() + static_cast<std::ptrdiff_t>(*start), phonemes.end());
}

// --- RhymeLexicon -------------------------------------------------------------

RhymeLexicon RhymeLexicon::parse(std::string_view text) {
    RhymeLexicon lex;
    for_each_line(text, [&](std::string_view line) {
        if (line.starts_with(";;;") || trim(line).empty()) return;
        std::vector<std::string> fields;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            const auto start = i;
            while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            if (i > start) fields.emplace_back(line.substr(start, i - start));
        }
        if (fields.size() < 2) throw ConfigError("pronouncing dictionary entry without phonemes: " + std::string(line));
        if (fields.front().find('(') != std::string::npos) return;
        auto word = lowercase(fields.front());
        lex.add(std::move(word), Phonemes(fields.begin() + 1, fields.end()));
    });
    return lex;
}

RhymeLexicon RhymeLexicon::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

void RhymeLexicon::add(std::string word, Phonemes phonemes) {
    if (phonemes.empty()) throw ConfigError("lexicon entry '" + word + "' has no phonemes");
    word = lowercase(word);
    if (entries_.contains(word)) return;
    const auto tail = rhyme_tail(phonemes);
    if (!tail.empty()) {
        auto& bucket = by_tail_[tail_key(tail)];
        bucket.insert(std::upper_bound(bucket.begin(), bucket.end(), word), word);
    }
    entries_.emplace(std::move(word), std::move(phonemes));
}

const Phonemes* RhymeLexicon::find(std::string_view word) const {
    const auto it = entries_.find(word);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> RhymeLexicon::rhymes_for(std::string_view word) const {
    const auto* phonemes = find(word);
    if (!phonemes) return {};
    const auto tail = rhyme_tail(*phonemes);
    if (tail.empty()) return {};
    auto out = by_tail_.at(tail_key(tail));
    out.erase(std::remove(out.begin(), out.end(), word), out.end());
    return out;
}

bool rhymes(std::string_view a, std::string_view b, const RhymeLexicon& lexicon) {
    if (a == b) return false;
    const auto* pa = lexicon.find(a);
    const auto* pb = lexicon.find(b);
    if (!pa || !pb) return false;
    const auto ta = rhyme_tail(*pa);
    const auto tb = rhyme_tail(*pb);
    if (ta.empty() || tb.empty()) return false;
    return tail_key(ta) == tail_key(tb);
}

// --- Glossary -----------------------------------------------------------------

Glossary Glossary::parse(std::string_view text) {
    Glossary gloss;
    for_each_line(text, [&](std::string_view line) {
        if (trim(line).empty() || line.front() == '#') return;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) throw ConfigError("glossary line lacks a tab: " + std::string(line));
        gloss.add(std::string(trim(line.substr(0, tab))), std::string(trim(line.substr(tab + 1))));
    });
    return gloss;
}

Glossary Glossary::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

void Glossary::add(std::string word, std::string definition) {
    if (word.empty() || definition.empty()) throw ConfigError("glossary entry with empty word or definition");
    entries_.insert_or_assign(lowercase(word), std::move(definition));
}

const std::string* Glossary::find(std::string_view word) const {
    const auto it = entries_.find(word);
    return it == entries_.end() ? nullptr : &it->second;
}

// --- Templates ----------------------------------------------------------------

Template::Template(std::size_t id, std::string pattern) : id_(id), pattern_(std::move(pattern)) {
    std::size_t pos = 0;
    while ((pos = pattern_.find_first_of("{}", pos)) != std::string::npos) {
        if (pattern_[pos] == '}') throw ConfigError("template " + std::to_string(id_) + ": stray '}'");
        const auto close = pattern_.find('}', pos);
        if (close == std::string::npos) throw ConfigError("template " + std::to_string(id_) + ": unclosed '{'");
        const auto name = std::string_view(pattern_).substr(pos + 1, close - pos - 1);
        if (name == "noun") slots_.push_back(Slot::Noun);
        else if (name == "rhyme") slots_.push_back(Slot::Rhyme);
        else if (name == "definition") slots_.push_back(Slot::Definition);
        else throw ConfigError("template " + std::to_string(id_) + ": unknown slot {" + std::string(name) + "}");
        pos = close + 1;
    }
    if (uses(Slot::Rhyme) && !uses(Slot::Noun))
        throw ConfigError("template " + std::to_string(id_) + ": {rhyme} requires {noun}");
}

bool Template::uses(Slot slot) const {
    return std::find(slots_.begin(), slots_.end(), slot) != slots_.end();
}

std::string Template::fill(std::string_view noun, std::string_view rhyme, std::string_view definition) const {
    std::string out;
    std::size_t pos = 0;
    while (pos < pattern_.size()) {
        const auto open = pattern_.find('{', pos);
        if (open == std::string::npos) {
            out.append(pattern_, pos);
            break;
        }
        out.append(pattern_, pos, open - pos);
        const auto close = pattern_.find('}', open);
        const auto name = std::string_view(pattern_).substr(open + 1, close - open - 1);
        out += name == "noun" ? noun : name == "rhyme" ? rhyme : definition;
        pos = close + 1;
    }
    return out;
}

std::vector<Template> parse_templates(std::string_view text) {
    std::vector<Template> templates;
    for_each_line(text, [&](std::string_view line) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') return;
        templates.emplace_back(templates.size(), std::string(t));
    });
    if (std::none_of(templates.begin(), templates.end(), [](const Template& t) { return t.is_fallback(); }))
        throw ConfigError("poetry templates need at least one template without {rhyme} or {definition}");
    return templates;
}

std::vector<Template> load_templates(const std::filesystem::path& path) {
    return parse_templates(read_text_file(path));
}

PoetryAssets load_poetry_assets(const std::filesystem::path& templates_path,
                                const std::filesystem::path& rhymes_path,
                                const std::filesystem::path& glossary_path) {
    return {load_templates(templates_path), RhymeLexicon::load(rhymes_path), Glossary::load(glossary_path)};
}

// --- Generation ---------------------------------------------------------------

std::string focus_noun(std::string_view input, const RhymeLexicon& lexicon, const Glossary& glossary) {
    auto known = [&](std::string_view w) { return lexicon.contains(w) || glossary.contains(w); };
    auto normalize = [&](const std::string& token) {
        if (!known(token) && token.size() > 1 && token.back() == 's') {
            auto singular = token.substr(0, token.size() - 1);
            if (known(singular)) return singular;
        }
        return token;
    };
    const auto tokens = tokenize(input);
    for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
        auto word = normalize(*it);
        if (glossary.contains(word)) return word;
    }
    for (auto it = tokens.rbegin(); it != tokens.rend(); ++it)
        if (it->size() >= 3) return normalize(*it);
    return std::string(kDefaultNoun);
}

Proposal propose_poetry(std::span<const Template> templates, const RhymeLexicon& lexicon,
                        const Glossary& glossary, std::string_view input, std::uint64_t rng_seed) {
    const auto noun = focus_noun(input, lexicon, glossary);
    // The placeholder noun did not come from the child, so it only fills {noun}.
    const bool placeholder = noun == kDefaultNoun && !contains_token(input, kDefaultNoun);
    const auto rhyme_set = placeholder ? std::vector<std::string>{} : lexicon.rhymes_for(noun);
    const std::string* definition = placeholder ? nullptr : glossary.find(noun);
    // Rotating the sorted rhyme list by the seed picks the lexicographically
    // first rhyme at seed 0 and stays deterministic for any seed.
    const std::string rhyme = rhyme_set.empty() ? std::string() : rhyme_set[rng_seed % rhyme_set.size()];

    for (const auto& t : templates) {
        if (t.uses(Slot::Rhyme) && rhyme_set.empty()) continue;
        if (t.uses(Slot::Definition) && definition == nullptr) continue;
        const double certainty = t.uses(Slot::Rhyme) ? 0.9 : t.uses(Slot::Definition) ? 0.7 : 0.5;
        return Proposal(Source::Poetry, t.fill(noun, rhyme, definition ? *definition : ""), certainty);
    }
    throw ConfigError("poetry templates have no fallback template");
}

PoetryResponder::PoetryResponder(PoetryAssets assets) : assets_(std::move(assets)) {
    if (std::none_of(assets_.templates.begin(), assets_.templates.end(),
                     [](const Template& t) { return t.is_fallback(); }))
        throw ConfigError("poetry templates need a fallback template");
}

std::optional<Proposal> PoetryResponder::propose(const DialogueState& state, std::uint64_t turn_seed) const {
    return propose_poetry(assets_.templates, assets_.lexicon, assets_.glossary, last_text(state), turn_seed);
}

}  // namespace storyweaver
