#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace storyweaver {

enum class Speaker { User, System };

std::string_view to_string(Speaker speaker);
Speaker parse_speaker(std::string_view name);

/// One utterance in a session transcript. Text is stored verbatim.
class Turn {
  public:
    Turn(Speaker speaker, std::string text, std::size_t index);

    Speaker speaker() const noexcept { return speaker_; }
    const std::string& text() const noexcept { return text_; }
    std::size_t index() const noexcept { return index_; }

    friend bool operator==(const Turn&, const Turn&) = default;

  private:
    Speaker speaker_;
    std::string text_;
    std::size_t index_;
};

inline constexpr std::size_t kDefaultContextWindow = 4;

/// Ordered turn history for one session. Indices run 0,1,2,... with no gaps.
class DialogueState {
  public:
    explicit DialogueState(std::size_t context_window = kDefaultContextWindow);

    std::size_t context_window() const noexcept { return context_window_; }
    const std::vector<Turn>& turns() const noexcept { return turns_; }
    std::size_t size() const noexcept { return turns_.size(); }
    bool empty() const noexcept { return turns_.empty(); }

    /// Returns a copy with one more turn; `*this` is untouched.
    DialogueState with_turn(Speaker speaker, std::string text) const;

    /// In-place append for callers that hold exclusive access.
    const Turn& push(Speaker speaker, std::string text);

    friend bool operator==(const DialogueState&, const DialogueState&) = default;

  private:
    std::size_t context_window_;
    std::vector<Turn> turns_;
};

/// The last min(N, size) turns, in order.
std::span<const Turn> window(const DialogueState& state);

/// Text of the most recent turn, or empty when there are none.
std::string_view last_text(const DialogueState& state);

enum class Source { Topic, Context, Poetry };

std::string_view to_string(Source source);
Source parse_source(std::string_view name);

/// A candidate reply. certainty lies in [0,1].
struct Proposal {
    Source source;
    std::string text;
    double certainty;

    Proposal(Source source, std::string text, double certainty);

    friend bool operator==(const Proposal&, const Proposal&) = default;
};

/// Anything that can propose a reply for the current dialogue state.
///
/// `turn_seed` feeds subsystems that make seeded choices; others ignore it.
/// Returning nullopt means "nothing to say"; throwing means the subsystem failed.
class ProposalSource {
  public:
    virtual ~ProposalSource() = default;
    virtual Source source() const = 0;
    virtual std::optional<Proposal> propose(const DialogueState& state,
                                            std::uint64_t turn_seed) const = 0;
};

/// Transcript log record: {"index", "speaker", "text", "ts"}.
struct TranscriptRecord {
    std::size_t index;
    Speaker speaker;
    std::string text;
    std::string ts;
};

std::string to_json_line(const TranscriptRecord& record);
TranscriptRecord parse_transcript_line(std::string_view line);

/// Rebuilds a state from log records; records must be in index order.
DialogueState replay(std::span<const TranscriptRecord> records,
                     std::size_t context_window = kDefaultContextWindow);

std::string_view trim(std::string_view text);

}  // namespace storyweaver
