#include "storyweaver/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "storyweaver/error.hpp"
#include "storyweaver/kernels.hpp"
#include "storyweaver/random.hpp"

namespace storyweaver {
namespace {

constexpr std::array<std::string_view, Vocab::kReserved> kReservedNames = {"<pad>", "<bos>", "<eos>",
                                                                           "<unk>", "<sep>"};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct GruWeights {
    std::span<const double> w;  // 3H x E
    std::span<const double> u;  // 3H x H
    std::span<const double> b;  // 3H
    std::size_t in;
    std::size_t hidden;
};

struct GruGrads {
    std::span<double> w;
    std::span<double> u;
    std::span<double> b;
};

struct GruStep {
    TokenId input = 0;
    std::vector<double> h_prev, z, r, n, rh, h;
};

void gru_forward(const GruWeights& g, std::span<const double> x, std::span<const double> h_prev,
                 GruStep& step) {
    const std::size_t H = g.hidden;
    const std::size_t E = g.in;
    step.h_prev.assign(h_prev.begin(), h_prev.end());
    step.z.assign(H, 0.0);
    step.r.assign(H, 0.0);
    step.n.assign(H, 0.0);
    step.rh.assign(H, 0.0);
    step.h.assign(H, 0.0);

    auto input_part = [&](std::size_t row) {
        double acc = g.b[row];
        for (std::size_t e = 0; e < E; ++e) acc += g.w[row * E + e] * x[e];
        return acc;
    };
    auto recurrent = [&](std::size_t row, std::span<const double> h) {
        double acc = 0.0;
        for (std::size_t j = 0; j < H; ++j) acc += g.u[row * H + j] * h[j];
        return acc;
    };
    for (std::size_t i = 0; i < H; ++i) {
        step.z[i] = sigmoid(input_part(i) + recurrent(i, h_prev));
        step.r[i] = sigmoid(input_part(H + i) + recurrent(H + i, h_prev));
    }
    for (std::size_t j = 0; j < H; ++j) step.rh[j] = step.r[j] * h_prev[j];
    for (std::size_t i = 0; i < H; ++i) {
        step.n[i] = std::tanh(input_part(2 * H + i) + recurrent(2 * H + i, step.rh));
        step.h[i] = (1.0 - step.z[i]) * step.n[i] + step.z[i] * h_prev[i];
    }
}

// Accumulates parameter gradients; writes d(loss)/dx into dx and d(loss)/dh_prev into dh_prev.
void gru_backward(const GruWeights& g, std::span<const double> x, const GruStep& step,
                  std::span<const double> dh, GruGrads grads, std::span<double> dx,
                  std::span<double> dh_prev) {
    const std::size_t H = g.hidden;
    const std::size_t E = g.in;
    std::vector<double> da(3 * H, 0.0);  // pre-activation grads, gate order z, r, n
    for (std::size_t i = 0; i < H; ++i) {
        const double dn = dh[i] * (1.0 - step.z[i]);
        const double dz = dh[i] * (step.h_prev[i] - step.n[i]);
        dh_prev[i] = dh[i] * step.z[i];
        da[2 * H + i] = dn * (1.0 - step.n[i] * step.n[i]);
        da[i] = dz * step.z[i] * (1.0 - step.z[i]);
    }
    for (std::size_t j = 0; j < H; ++j) {
        double drh = 0.0;
        for (std::size_t i = 0; i < H; ++i) drh += g.u[(2 * H + i) * H + j] * da[2 * H + i];
        dh_prev[j] += drh * step.r[j];
        const double dr = drh * step.h_prev[j];
        da[H + j] = dr * step.r[j] * (1.0 - step.r[j]);
    }
    for (std::size_t row = 0; row < 3 * H; ++row) {
        const double d = da[row];
        grads.b[row] += d;
        for (std::size_t e = 0; e < E; ++e) grads.w[row * E + e] += d * x[e];
        const auto& hin = row < 2 * H ? step.h_prev : step.rh;
        for (std::size_t j = 0; j < H; ++j) grads.u[row * H + j] += d * hin[j];
    }
    std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t row = 0; row < 3 * H; ++row)
        for (std::size_t e = 0; e < E; ++e) dx[e] += g.w[row * E + e] * da[row];
    for (std::size_t row = 0; row < 2 * H; ++row)
        for (std::size_t j = 0; j < H; ++j) dh_prev[j] += g.u[row * H + j] * da[row];
}

GruWeights encoder_of(const Seq2SeqModel& m) {
    const auto& p = m.params();
    return {p.enc_w, p.enc_u, p.enc_b, m.dims().embed, m.dims().hidden};
}

GruWeights decoder_of(const Seq2SeqModel& m) {
    const auto& p = m.params();
    return {p.dec_w, p.dec_u, p.dec_b, m.dims().embed, m.dims().hidden};
}

std::span<const double> embedding(const Seq2SeqModel& m, TokenId id) {
    const std::size_t E = m.dims().embed;
    if (id >= m.dims().vocab) throw InvalidArgument("token id outside vocabulary");
    return std::span<const double>(m.params().embed).subspan(id * E, E);
}

std::vector<double> log_softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (const double l : logits) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

std::size_t argmax_lowest(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::vector<TokenId> effective_context(std::span<const TokenId> context_ids) {
    if (context_ids.empty()) return {Vocab::kBos};
    return {context_ids.begin(), context_ids.end()};
}

// Runs the encoder, returning the per-step caches; the final hidden is steps.back().h.
std::vector<GruStep> run_encoder(const Seq2SeqModel& model, std::span<const TokenId> ids) {
    const auto enc = encoder_of(model);
    std::vector<GruStep> steps(ids.size());
    std::vector<double> h(model.dims().hidden, 0.0);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        steps[t].input = ids[t];
        gru_forward(enc, embedding(model, ids[t]), h, steps[t]);
        h = steps[t].h;
    }
    return steps;
}

struct TeacherForced {
    std::vector<GruStep> encoder;
    std::vector<GruStep> decoder;
    std::vector<TokenId> labels;
    std::vector<std::vector<double>> log_probs;
    double loss = 0.0;
};

TeacherForced teacher_forced(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                             std::span<const TokenId> target_ids) {
    if (target_ids.empty()) throw InvalidArgument("target sequence is empty");
    const auto& p = model.params();
    TeacherForced tf;
    const auto ctx = effective_context(context_ids);
    tf.encoder = run_encoder(model, ctx);

    std::vector<TokenId> inputs{Vocab::kBos};
    inputs.insert(inputs.end(), target_ids.begin(), target_ids.end());
    tf.labels.assign(target_ids.begin(), target_ids.end());
    tf.labels.push_back(Vocab::kEos);

    const auto dec = decoder_of(model);
    std::vector<double> h = tf.encoder.back().h;
    std::vector<double> logits(model.dims().vocab);
    tf.decoder.resize(inputs.size());
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        tf.decoder[t].input = inputs[t];
        gru_forward(dec, embedding(model, inputs[t]), h, tf.decoder[t]);
        h = tf.decoder[t].h;
        kernels::serial::vecmat(h, p.out_w, p.out_b, logits);
        tf.log_probs.push_back(log_softmax(logits));
        tf.loss -= tf.log_probs.back()[tf.labels[t]];
    }
    tf.loss /= static_cast<double>(tf.labels.size());
    return tf;
}

void add_embedding_grad(Seq2SeqParams& grads, std::size_t embed_dim, TokenId id,
                        std::span<const double> dx) {
    for (std::size_t e = 0; e < embed_dim; ++e) grads.embed[id * embed_dim + e] += dx[e];
}

}  // namespace

// --- Vocab ------------------------------------------------------------------

Vocab::Vocab() {
    for (const auto name : kReservedNames) {
        ids_.emplace(std::string(name), static_cast<TokenId>(tokens_.size()));
        tokens_.emplace_back(name);
    }
}

Vocab Vocab::build(std::span<const std::string> utterances, std::size_t max_size) {
    Vocab vocab;
    std::map<std::string, std::size_t> counts;
    for (const auto& u : utterances)
        for (auto& t : tokenize(u)) ++counts[std::move(t)];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    // counts is already lexicographic, so a stable sort by frequency keeps the tie order.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (auto& [token, n] : ranked) {
        if (vocab.tokens_.size() >= max_size) break;
        if (vocab.ids_.contains(token)) continue;
        vocab.ids_.emplace(token, static_cast<TokenId>(vocab.tokens_.size()));
        vocab.tokens_.push_back(token);
    }
    return vocab;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < kReserved) throw InvalidArgument("vocabulary lacks reserved tokens");
    for (std::size_t i = 0; i < kReserved; ++i)
        if (tokens[i] != kReservedNames[i]) throw InvalidArgument("vocabulary reserved tokens out of order");
    Vocab vocab;
    for (std::size_t i = kReserved; i < tokens.size(); ++i) {
        if (!vocab.ids_.emplace(tokens[i], static_cast<TokenId>(i)).second)
            throw InvalidArgument("duplicate vocabulary token: " + tokens[i]);
        vocab.tokens_.push_back(std::move(tokens[i]));
    }
    return vocab;
}

TokenId Vocab::id(std::string_view token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

// --- Parameters -------------------------------------------------------------

Seq2SeqParams Seq2SeqParams::zeros(const Seq2SeqDims& d) {
    const std::size_t V = d.vocab, E = d.embed, H = d.hidden;
    Seq2SeqParams p;
    p.embed.assign(V * E, 0.0);
    p.enc_w.assign(3 * H * E, 0.0);
    p.enc_u.assign(3 * H * H, 0.0);
    p.enc_b.assign(3 * H, 0.0);
    p.dec_w.assign(3 * H * E, 0.0);
    p.dec_u.assign(3 * H * H, 0.0);
    p.dec_b.assign(3 * H, 0.0);
    p.out_w.assign(H * V, 0.0);
    p.out_b.assign(V, 0.0);
    return p;
}

std::array<std::span<double>, Seq2SeqParams::kTensorCount> Seq2SeqParams::tensors() {
    return {embed, enc_w, enc_u, enc_b, dec_w, dec_u, dec_b, out_w, out_b};
}

std::array<std::span<const double>, Seq2SeqParams::kTensorCount> Seq2SeqParams::tensors() const {
    return {embed, enc_w, enc_u, enc_b, dec_w, dec_u, dec_b, out_w, out_b};
}

std::size_t Seq2SeqParams::count() const {
    std::size_t n = 0;
    for (const auto t : tensors()) n += t.size();
    return n;
}

double Seq2SeqParams::squared_norm() const {
    double sq = 0.0;
    for (const auto t : tensors())
        for (const double v : t) sq += v * v;
    return sq;
}

Seq2SeqModel::Seq2SeqModel(Seq2SeqDims dims, std::uint64_t seed)
    : dims_(dims), seed_(seed), params_(Seq2SeqParams::zeros(dims)) {
    if (dims_.vocab < Vocab::kReserved || dims_.embed == 0 || dims_.hidden == 0)
        throw InvalidArgument("invalid seq2seq dimensions");
    std::mt19937_64 rng(seed_);
    for (auto tensor : params_.tensors())
        for (auto& v : tensor) v = uniform(rng, -kInitRange, kInitRange);
}

Seq2SeqModel::Seq2SeqModel(Seq2SeqDims dims, std::uint64_t seed, Seq2SeqParams params)
    : dims_(dims), seed_(seed), params_(std::move(params)) {
    const auto expected = Seq2SeqParams::zeros(dims_);
    const auto want = expected.tensors();
    const auto have = std::as_const(params_).tensors();
    for (std::size_t i = 0; i < want.size(); ++i)
        if (want[i].size() != have[i].size()) throw InvalidArgument("seq2seq tensor shape mismatch");
}

// --- Encoding ---------------------------------------------------------------

std::vector<TokenId> encode_utterance(std::string_view text, const Vocab& vocab) {
    std::vector<TokenId> ids;
    for (const auto& t : tokenize(text)) ids.push_back(vocab.id(t));
    return ids;
}

std::vector<TokenId> encode_context(const DialogueState& state, const Vocab& vocab) {
    std::vector<TokenId> ids;
    bool first = true;
    for (const auto& turn : window(state)) {
        if (!first) ids.push_back(Vocab::kSep);
        first = false;
        const auto turn_ids = encode_utterance(turn.text(), vocab);
        ids.insert(ids.end(), turn_ids.begin(), turn_ids.end());
    }
    if (ids.size() > kMaxContextIds) ids.erase(ids.begin(), ids.end() - kMaxContextIds);
    return ids;
}

// --- Inference --------------------------------------------------------------

namespace {

template <typename OnStep>
Decoded greedy_decode(const Seq2SeqModel& model, std::span<const TokenId> context_ids, OnStep&& on_step) {
    const auto& p = model.params();
    const auto ctx = effective_context(context_ids);
    const auto encoder = run_encoder(model, ctx);
    const auto dec = decoder_of(model);

    Decoded out;
    std::vector<double> h = encoder.back().h;
    std::vector<double> logits(model.dims().vocab);
    GruStep step;
    TokenId input = Vocab::kBos;
    double logprob_sum = 0.0;
    for (std::size_t t = 0; t < kMaxDecodeLength; ++t) {
        gru_forward(dec, embedding(model, input), h, step);
        h = step.h;
        kernels::parallel::vecmat(h, p.out_w, p.out_b, logits);
        const auto lp = log_softmax(logits);
        on_step(lp);
        const auto next = static_cast<TokenId>(argmax_lowest(logits));
        if (next == Vocab::kEos) break;
        out.ids.push_back(next);
        logprob_sum += lp[next];
        input = next;
    }
    if (!out.ids.empty()) out.mean_logprob = logprob_sum / static_cast<double>(out.ids.size());
    return out;
}

}  // namespace

Decoded forward_decode(const Seq2SeqModel& model, std::span<const TokenId> context_ids) {
    return greedy_decode(model, context_ids, [](const std::vector<double>&) {});
}

std::vector<std::vector<double>> decode_distributions(const Seq2SeqModel& model,
                                                      std::span<const TokenId> context_ids) {
    std::vector<std::vector<double>> dists;
    greedy_decode(model, context_ids, [&](const std::vector<double>& lp) {
        std::vector<double> probs(lp.size());
        std::transform(lp.begin(), lp.end(), probs.begin(), [](double l) { return std::exp(l); });
        dists.push_back(std::move(probs));
    });
    return dists;
}

std::string detokenize(std::span<const TokenId> ids, const Vocab& vocab) {
    std::string text;
    for (const auto id : ids) {
        if (Vocab::is_reserved(id) || id >= vocab.size()) continue;
        if (!text.empty()) text.push_back(' ');
        text += vocab.token(id);
    }
    return text;
}

Proposal propose_context(const Seq2SeqModel& model, const Vocab& vocab, const DialogueState& state) {
    const auto decoded = forward_decode(model, encode_context(state, vocab));
    const auto text = detokenize(decoded.ids, vocab);
    if (text.empty()) return Proposal(Source::Context, "hmm", 0.0);
    return Proposal(Source::Context, text, std::clamp(std::exp(decoded.mean_logprob), 0.0, 1.0));
}

std::optional<Proposal> ContextResponder::propose(const DialogueState& state, std::uint64_t) const {
    return propose_context(model_, vocab_, state);
}

// --- Training ---------------------------------------------------------------

double sequence_loss(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                     std::span<const TokenId> target_ids) {
    return teacher_forced(model, context_ids, target_ids).loss;
}

double loss_and_gradients(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                          std::span<const TokenId> target_ids, Seq2SeqParams& grads) {
    const auto& d = model.dims();
    const auto& p = model.params();
    const std::size_t H = d.hidden, E = d.embed, V = d.vocab;
    grads = Seq2SeqParams::zeros(d);
    const auto tf = teacher_forced(model, context_ids, target_ids);
    const double scale = 1.0 / static_cast<double>(tf.labels.size());

    const auto dec = decoder_of(model);
    const GruGrads dec_grads{grads.dec_w, grads.dec_u, grads.dec_b};
    std::vector<double> dh(H, 0.0), dh_prev(H), dx(E), dlogits(V);
    for (std::size_t t = tf.decoder.size(); t-- > 0;) {
        const auto& step = tf.decoder[t];
        for (std::size_t v = 0; v < V; ++v) dlogits[v] = std::exp(tf.log_probs[t][v]) * scale;
        dlogits[tf.labels[t]] -= scale;
        for (std::size_t j = 0; j < H; ++j) {
            double acc = 0.0;
            for (std::size_t v = 0; v < V; ++v) {
                grads.out_w[j * V + v] += step.h[j] * dlogits[v];
                acc += p.out_w[j * V + v] * dlogits[v];
            }
            dh[j] += acc;
        }
        for (std::size_t v = 0; v < V; ++v) grads.out_b[v] += dlogits[v];
        gru_backward(dec, embedding(model, step.input), step, dh, dec_grads, dx, dh_prev);
        add_embedding_grad(grads, E, step.input, dx);
        dh = dh_prev;
    }

    const auto enc = encoder_of(model);
    const GruGrads enc_grads{grads.enc_w, grads.enc_u, grads.enc_b};
    for (std::size_t t = tf.encoder.size(); t-- > 0;) {
        const auto& step = tf.encoder[t];
        gru_backward(enc, embedding(model, step.input), step, dh, enc_grads, dx, dh_prev);
        add_embedding_grad(grads, E, step.input, dx);
        dh = dh_prev;
    }
    return tf.loss;
}

double train_step(Seq2SeqModel& model, std::span<const TokenId> context_ids,
                  std::span<const TokenId> target_ids, double lr) {
    if (!(lr >= 0.0)) throw InvalidArgument("learning rate must be non-negative");
    Seq2SeqParams grads;
    const double loss = loss_and_gradients(model, context_ids, target_ids, grads);
    const double norm = std::sqrt(grads.squared_norm());
    const double clip = norm > kClipNorm ? kClipNorm / norm : 1.0;
    auto params = model.params().tensors();
    const auto g = std::as_const(grads).tensors();
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k].size(); ++i) params[k][i] -= lr * (clip * g[k][i]);
    return loss;
}

double numeric_gradient_error(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                              std::span<const TokenId> target_ids, const Seq2SeqParams& analytic,
                              double h) {
    Seq2SeqModel probe = model;
    auto params = probe.params().tensors();
    const auto grads = analytic.tensors();
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k].size(); ++i) {
            const double saved = params[k][i];
            params[k][i] = saved + h;
            const double up = sequence_loss(probe, context_ids, target_ids);
            params[k][i] = saved - h;
            const double down = sequence_loss(probe, context_ids, target_ids);
            params[k][i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double ga = grads[k][i];
            const double rel = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

double gradient_check(const Seq2SeqModel& model, std::span<const TokenId> context_ids,
                      std::span<const TokenId> target_ids) {
    Seq2SeqParams grads;
    loss_and_gradients(model, context_ids, target_ids, grads);
    return numeric_gradient_error(model, context_ids, target_ids, grads);
}

std::vector<TrainingPair> make_training_pairs(const Corpus& corpus, const Vocab& vocab,
                                              std::size_t context_window) {
    std::vector<TrainingPair> pairs;
    for (const auto& dialogue : corpus.dialogues) {
        DialogueState state(context_window);
        for (std::size_t t = 0; t < dialogue.size(); ++t) {
            if (t > 0) {
                auto target = encode_utterance(dialogue[t], vocab);
                if (!target.empty()) pairs.push_back({encode_context(state, vocab), std::move(target)});
            }
            state.push(t % 2 == 0 ? Speaker::User : Speaker::System, dialogue[t]);
        }
    }
    return pairs;
}

TrainedContextModel train_context_model(const Corpus& corpus, const ContextTrainingOptions& options,
                                        const std::function<void(std::size_t, double)>& on_epoch) {
    const auto utterances = corpus.utterances();
    auto vocab = Vocab::build(utterances, options.vocab_size);
    Seq2SeqModel model({vocab.size(), options.embed, options.hidden}, options.seed);
    const auto pairs = make_training_pairs(corpus, vocab, options.context_window);

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(options.seed));
    std::vector<double> losses;
    for (std::size_t epoch = 1; epoch <= options.epochs && !pairs.empty(); ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        double total = 0.0;
        for (const auto idx : order) total += train_step(model, pairs[idx].context, pairs[idx].target, options.lr);
        const double mean = total / static_cast<double>(pairs.size());
        losses.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    return {std::move(model), std::move(vocab), std::move(losses)};
}

}  // namespace storyweaver
