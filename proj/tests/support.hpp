#pragma once

// Helpers shared by the unit and acceptance tests: data paths, temporary
// directories, and small reference implementations used as oracles.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path data_path(std::string_view rel) { return fs::path(STORYWEAVER_DATA_DIR) / rel; }
inline fs::path fixture_path(std::string_view rel) { return fs::path(STORYWEAVER_FIXTURE_DIR) / rel; }

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void spit(const fs::path& p, std::string_view text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

class TempDir {
  public:
    explicit TempDir(std::string_view tag = "sw") {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = fs::temp_directory_path() /
                (std::string(tag) + "-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
                 std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(std::string_view name) const { return path_ / name; }

  private:
    fs::path path_;
};

// Okapi BM25 straight from the formula, one (query, sentence) pair at a time.
struct BruteBm25 {
    std::vector<std::vector<std::string>> docs;
    double k1 = 1.2;
    double b = 0.75;

    double score(const std::vector<std::string>& query, std::size_t d) const {
        const double n = static_cast<double>(docs.size());
        double total_len = 0;
        for (const auto& doc : docs) total_len += static_cast<double>(doc.size());
        const double avg = total_len / n;
        std::set<std::string> seen;
        double s = 0.0;
        for (const auto& q : query) {
            if (!seen.insert(q).second) continue;
            double df = 0;
            for (const auto& doc : docs)
                for (const auto& w : doc)
                    if (w == q) {
                        df += 1;
                        break;
                    }
            double tf = 0;
            for (const auto& w : docs[d])
                if (w == q) tf += 1;
            if (tf == 0) continue;
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double len = static_cast<double>(docs[d].size());
            s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
        }
        return s;
    }
};

// Rhyme check written against raw dictionary lines, independent of RhymeLexicon.
struct BruteRhymer {
    std::map<std::string, std::vector<std::string>> pron;

    static BruteRhymer from_dict(const std::string& text) {
        BruteRhymer r;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind(";;;", 0) == 0) continue;
            std::istringstream ls(line);
            std::string word;
            if (!(ls >> word) || word.find('(') != std::string::npos) continue;
            for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            std::vector<std::string> ph;
            std::string p;
            while (ls >> p) ph.push_back(p);
            if (!ph.empty()) r.pron.emplace(word, ph);
        }
        return r;
    }

    static bool vowel(const std::string& p) { return !p.empty() && std::isdigit(static_cast<unsigned char>(p.back())); }

    static std::vector<std::string> tail(const std::vector<std::string>& ph) {
        int start = -1;
        for (int i = static_cast<int>(ph.size()) - 1; i >= 0 && start < 0; --i)
            if (vowel(ph[i]) && ph[i].back() == '1') start = i;
        for (int i = static_cast<int>(ph.size()) - 1; i >= 0 && start < 0; --i)
            if (vowel(ph[i])) start = i;
        if (start < 0) return {};
        std::vector<std::string> out(ph.begin() + start, ph.end());
        for (std::size_t i = 1; i < out.size(); ++i)
            if (vowel(out[i])) out[i].pop_back();
        return out;
    }

    bool rhymes(const std::string& a, const std::string& b) const {
        if (a == b) return false;
        const auto ia = pron.find(a);
        const auto ib = pron.find(b);
        if (ia == pron.end() || ib == pron.end()) return false;
        const auto ta = tail(ia->second);
        return !ta.empty() && ta == tail(ib->second);
    }
};

// Signed hashed feature vector computed from first principles.
inline std::vector<double> brute_features(const std::vector<std::string>& tokens, std::size_t dim) {
    auto fnv = [](const std::string& s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    };
    std::vector<double> v(dim, 0.0);
    std::vector<std::string> feats = tokens;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) feats.push_back(tokens[i] + " " + tokens[i + 1]);
    for (const auto& f : feats) {
        const auto h = fnv(f);
        v[h % dim] += (h & (1ULL << 63)) ? -1.0 : 1.0;
    }
    double n = 0;
    for (double x : v) n += x * x;
    if (n > 0)
        for (double& x : v) x /= std::sqrt(n);
    return v;
}

inline double brute_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / std::sqrt(na * nb);
}

}  // namespace testsupport
