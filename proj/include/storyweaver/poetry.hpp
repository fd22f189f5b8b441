#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storyweaver/dialogue.hpp"

namespace storyweaver {

using Phonemes = std::vector<std::string>;

/// Phoneme suffix from the last primary-stressed vowel (or, failing that, the
/// last vowel of any stress) to the end. Empty when there is no vowel.
Phonemes rhyme_tail(std::span<const std::string> phonemes);

/// Word -> ARPAbet pronunciation, with an index of words sharing a rhyme tail.
class RhymeLexicon {
  public:
    /// "WORD  PH1 PH2 ..." per line; ";;;" lines ignored; alternate
    /// pronunciations ("WORD(1)") are skipped.
    static RhymeLexicon parse(std::string_view text);
    static RhymeLexicon load(const std::filesystem::path& path);

    void add(std::string word, Phonemes phonemes);

    const Phonemes* find(std::string_view word) const;
    bool contains(std::string_view word) const { return find(word) != nullptr; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<std::string, Phonemes, std::less<>>& entries() const noexcept { return entries_; }

    /// Lexicon words rhyming with `word`, sorted.
    std::vector<std::string> rhymes_for(std::string_view word) const;

  private:
    std::map<std::string, Phonemes, std::less<>> entries_;
    std::map<std::string, std::vector<std::string>> by_tail_;
};

/// Distinct, both known, equal non-empty tails (stress ignored after the first phoneme).
bool rhymes(std::string_view a, std::string_view b, const RhymeLexicon& lexicon);

class Glossary {
  public:
    /// "word<TAB>definition" per line.
    static Glossary parse(std::string_view text);
    static Glossary load(const std::filesystem::path& path);

    void add(std::string word, std::string definition);
    const std::string* find(std::string_view word) const;
    bool contains(std::string_view word) const { return find(word) != nullptr; }
    std::size_t size() const noexcept { return entries_.size(); }

  private:
    std::map<std::string, std::string, std::less<>> entries_;
};

enum class Slot { Noun, Rhyme, Definition };

class Template {
  public:
    /// Throws ConfigError on unknown slots, stray braces, or {rhyme} without {noun}.
    Template(std::size_t id, std::string pattern);

    std::size_t id() const noexcept { return id_; }
    const std::string& pattern() const noexcept { return pattern_; }
    bool uses(Slot slot) const;
    /// Uses neither {rhyme} nor {definition}, so it can always be filled.
    bool is_fallback() const { return !uses(Slot::Rhyme) && !uses(Slot::Definition); }

    std::string fill(std::string_view noun, std::string_view rhyme, std::string_view definition) const;

  private:
    std::size_t id_;
    std::string pattern_;
    std::vector<Slot> slots_;
};

/// One template per line; '#' lines are comments. Throws ConfigError if no fallback template.
std::vector<Template> parse_templates(std::string_view text);
std::vector<Template> load_templates(const std::filesystem::path& path);

struct PoetryAssets {
    std::vector<Template> templates;
    RhymeLexicon lexicon;
    Glossary glossary;
};

PoetryAssets load_poetry_assets(const std::filesystem::path& templates_path,
                                const std::filesystem::path& rhymes_path,
                                const std::filesystem::path& glossary_path);

/// Last glossary word in the input, else the last token of 3+ characters, else "story".
/// A trailing "s" is dropped when only the singular is known.
std::string focus_noun(std::string_view input, const RhymeLexicon& lexicon, const Glossary& glossary);

/// Total: always yields a proposal with certainty 0.9, 0.7 or 0.5.
Proposal propose_poetry(std::span<const Template> templates, const RhymeLexicon& lexicon,
                        const Glossary& glossary, std::string_view input, std::uint64_t rng_seed);

class PoetryResponder final : public ProposalSource {
  public:
    explicit PoetryResponder(PoetryAssets assets);
    Source source() const override { return Source::Poetry; }
    std::optional<Proposal> propose(const DialogueState& state, std::uint64_t turn_seed) const override;

  private:
    PoetryAssets assets_;
};

}  // namespace storyweaver
