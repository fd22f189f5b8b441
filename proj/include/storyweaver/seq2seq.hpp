#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storyweaver/corpus.hpp"
#include "storyweaver/dialogue.hpp"
#include "storyweaver/text.hpp"

namespace storyweaver {

using TokenId = std::uint32_t;

class Vocab {
  public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kBos = 1;
    static constexpr TokenId kEos = 2;
    static constexpr TokenId kUnk = 3;
    static constexpr TokenId kSep = 4;
    static constexpr std::size_t kReserved = 5;
    static constexpr std::size_t kDefaultMaxSize = 2000;

    /// Reserved ids, then tokens by descending frequency (ties lexicographic),
    /// capped at max_size entries in total.
    static Vocab build(std::span<const std::string> utterances, std::size_t max_size = kDefaultMaxSize);

    /// Rebuilds from an id-ordered token list whose first five entries are the reserved names.
    static Vocab from_tokens(std::vector<std::string> tokens);

    TokenId id(std::string_view token) const;
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    static bool is_reserved(TokenId id) noexcept { return id < kReserved; }

  private:
    Vocab();
    std::vector<std::string> tokens_;
    std::map<std::string, TokenId, std::less<>> ids_;
};

struct Seq2SeqDims {
    std::size_t vocab = 0;
    std::size_t embed = 16;
    std::size_t hidden = 32;

    friend bool operator==(const Seq2SeqDims&, const Seq2SeqDims&) = default;
};

/// All trainable tensors, row-major. Gate blocks inside the GRU tensors are
/// ordered update (z), reset (r), candidate (n). Gradients use the same type.
struct Seq2SeqParams {
    std::vector<double> embed;  // V x E
    std::vector<double> enc_w;  // 3H x E
    std::vector<double> enc_u;  // 3H x H
    std::vector<double> enc_b;  // 3H
    std::vector<double> dec_w;
    std::vector<double> dec_u;
    std::vector<double> dec_b;
    std::vector<double> out_w;  // H x V
    std::vector<double> out_b;  // V

    static constexpr std::size_t kTensorCount = 9;
    static Seq2SeqParams zeros(const Seq2SeqDims& dims);

    std::array<std::span<double>, kTensorCount> tensors();
    std::array<std::span<const double>, kTensorCount> tensors() const;
    std::size_t count() const;
    double squared_norm() const;

    friend bool operator==(const Seq2SeqParams&, const Seq2SeqParams&) = default;
};

class Seq2SeqModel {
  public:
    static constexpr double kInitRange = 0.08;

    /// Uniform(-0.08, 0.08) initialization from a generator seeded with `seed`.
    Seq2SeqModel(Seq2SeqDims dims, std::uint64_t seed);
    Seq2SeqModel(Seq2SeqDims dims, std::uint64_t seed, Seq2SeqParams params);

    const Seq2SeqDims& dims() const noexcept { return dims_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const Seq2SeqParams& params() const noexcept { return params_; }
    Seq2SeqParams& params() noexcept { return params_; }

    friend bool operator==(const Seq2SeqModel&, const Seq2SeqModel&) = default;

  private:
    Seq2SeqDims dims_;
    std::uint64_t seed_;
    Seq2SeqParams params_;
};

inline constexpr std::size_t kMaxContextIds = 64;
inline constexpr std::size_t kMaxDecodeLength = 20;
inline constexpr double kClipNorm = 5.0;

/// Windowed turns as ids joined by sep, keeping the most recent 64 ids.
std::vector<TokenId> encode_context(const DialogueState& state, const Vocab& vocab);

std::vector<TokenId> encode_utterance(std::string_view text, const Vocab& vocab);

struct Decoded {
    std::vector<TokenId> ids;  // without bos/eos
    double mean_logprob = 0.0;
};

/// Greedy decode, lowest id wins argmax ties. An empty context is treated as [bos].
Decoded forward_decode(const Seq2SeqModel& model, std::span<const TokenId> context_ids);

/// Per-step output distributions of a greedy decode; used to check softmax sanity.
std::vector<std::vector<double>> decode_distributions(const Seq2SeqModel& model,
                                                      std::span<const TokenId> context_ids);

/// Teacher-forced mean token cross-entropy (labels are target ++ [eos]).
double sequence_loss(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                     std::span<const TokenId> target_ids);

/// Loss plus its exact gradient via backpropagation through time.
double loss_and_gradients(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                          std::span<const TokenId> target_ids, Seq2SeqParams& gradients);

/// One clipped SGD step; returns the pre-update loss.
double train_step(Seq2SeqModel& model, std::span<const TokenId> context_ids,
                  std::span<const TokenId> target_ids, double lr);

/// Max relative error between `analytic` and central differences (step h).
double numeric_gradient_error(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                              std::span<const TokenId> target_ids, const Seq2SeqParams& analytic,
                              double h = 1e-4);

double gradient_check(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                      std::span<const TokenId> target_ids);

std::string detokenize(std::span<const TokenId> ids, const Vocab& vocab);

Proposal propose_context(const Seq2SeqModel& model, const Vocab& vocab, const DialogueState& state);

class ContextResponder final : public ProposalSource {
  public:
    ContextResponder(Seq2SeqModel model, Vocab vocab)
        : model_(std::move(model)), vocab_(std::move(vocab)) {}
    Source source() const override { return Source::Context; }
    std::optional<Proposal> propose(const DialogueState& state, std::uint64_t) const override;

  private:
    Seq2SeqModel model_;
    Vocab vocab_;
};

void save_model(const std::filesystem::path& path, const Seq2SeqModel& model, const Vocab& vocab);
std::pair<Seq2SeqModel, Vocab> load_model(const std::filesystem::path& path);

struct TrainingPair {
    std::vector<TokenId> context;
    std::vector<TokenId> target;
};

/// Adjacent-utterance pairs: the context is the window of turns before the target.
std::vector<TrainingPair> make_training_pairs(const Corpus& corpus, const Vocab& vocab,
                                              std::size_t context_window = kDefaultContextWindow);

struct ContextTrainingOptions {
    std::size_t epochs = 2000;
    double lr = 0.1;
    std::uint64_t seed = 1;
    std::size_t vocab_size = Vocab::kDefaultMaxSize;
    std::size_t embed = 16;
    std::size_t hidden = 32;
    std::size_t context_window = kDefaultContextWindow;
};

struct TrainedContextModel {
    Seq2SeqModel model;
    Vocab vocab;
    std::vector<double> epoch_losses;
};

/// Single-threaded; identical inputs give identical parameters.
TrainedContextModel train_context_model(
    const Corpus& corpus, const ContextTrainingOptions& options,
    const std::function<void(std::size_t epoch, double mean_loss)>& on_epoch = {});

}  // namespace storyweaver
