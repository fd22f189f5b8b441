#include <bit>
#include <cstring>
#include <fstream>

#include "storyweaver/error.hpp"
#include "storyweaver/seq2seq.hpp"

// Layout (all integers little-endian):
//   8 bytes  magic "SWS2SEQ1"
//   u64      vocab size V, embed E, hidden H, seed
//   V times  u32 byte length + token bytes (id order, reserved first)
//   f64      every tensor in Seq2SeqParams field order

namespace storyweaver {
namespace {

constexpr char kMagic[8] = {'S', 'W', 'S', '2', 'S', 'E', 'Q', '1'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
  public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    std::uint64_t u64() { return take_le(8); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(take_le(4)); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw IoError("model file truncated");
    }
    std::uint64_t take_le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_model(const std::filesystem::path& path, const Seq2SeqModel& model, const Vocab& vocab) {
    if (vocab.size() != model.dims().vocab) throw InvalidArgument("vocabulary does not match model");
    std::string out(kMagic, sizeof kMagic);
    put_u64(out, model.dims().vocab);
    put_u64(out, model.dims().embed);
    put_u64(out, model.dims().hidden);
    put_u64(out, model.seed());
    for (const auto& token : vocab.tokens()) {
        put_u32(out, static_cast<std::uint32_t>(token.size()));
        out += token;
    }
    for (const auto tensor : model.params().tensors())
        for (const double v : tensor) put_u64(out, std::bit_cast<std::uint64_t>(v));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("cannot write " + path.string());
}

std::pair<Seq2SeqModel, Vocab> load_model(const std::filesystem::path& path) {
    Reader in(read_text_file(path));
    if (in.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
        throw IoError(path.string() + ": not a seq2seq model file");
    Seq2SeqDims dims;
    dims.vocab = in.u64();
    dims.embed = in.u64();
    dims.hidden = in.u64();
    const auto seed = in.u64();
    if (dims.vocab > (1u << 24) || dims.embed > 4096 || dims.hidden > 4096)
        throw IoError(path.string() + ": implausible model dimensions");
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < dims.vocab; ++i) tokens.push_back(in.bytes(in.u32()));
    auto params = Seq2SeqParams::zeros(dims);
    for (auto tensor : params.tensors())
        for (auto& v : tensor) v = in.f64();
    if (!in.done()) throw IoError(path.string() + ": trailing bytes after parameters");
    return {Seq2SeqModel(dims, seed, std::move(params)), Vocab::from_tokens(std::move(tokens))};
}

}  // namespace storyweaver
