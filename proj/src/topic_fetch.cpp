#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "storyweaver/error.hpp"
#include "storyweaver/topic.hpp"

namespace storyweaver {
namespace fs = std::filesystem;
namespace {

std::optional<std::string> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomically(const fs::path& target, std::string_view body) {
    static std::atomic<unsigned> counter{0};
    fs::create_directories(target.parent_path());
    auto tmp = target;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
           "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        if (!out) throw IoError("cannot write " + tmp.string());
    }
    fs::rename(tmp, target);
}

// "http://host:port/prefix" -> ("http://host:port", "/prefix")
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw FetchFailed("topic.base_url has no scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string url_encode(std::string_view text) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(ch);
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        }
    }
    return out;
}

std::string fetch_topic(std::string_view title, const FetchOptions& options) {
    if (trim(title).empty()) throw InvalidArgument("topic title is empty");
    const auto encoded = url_encode(title);
    const auto cache_file = options.cache_dir / (encoded + ".txt");
    if (auto cached = read_file(cache_file)) return *cached;
    if (options.offline) throw OfflineMiss("topic '" + std::string(title) + "' not cached");

    const auto [origin, prefix] = split_url(options.base_url);
    httplib::Client client(origin);
    client.set_connection_timeout(options.timeout_seconds, 0);
    client.set_read_timeout(options.timeout_seconds, 0);
    client.set_follow_location(true);
    auto res = client.Get(prefix + encoded);
    if (!res) throw FetchFailed("GET " + options.base_url + encoded + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw FetchFailed("GET " + options.base_url + encoded + ": HTTP " + std::to_string(res->status));
    write_atomically(cache_file, res->body);
    return res->body;
}

std::string load_topic_text(std::string_view title, const FetchOptions& options,
                            const fs::path& bundled_dir) {
    try {
        return fetch_topic(title, options);
    } catch (const OfflineMiss&) {
    } catch (const FetchFailed&) {
    }
    const auto bundled = bundled_dir / (url_encode(title) + ".txt");
    if (auto text = read_file(bundled)) return *text;
    throw ConfigError("topic '" + std::string(title) + "' is neither cached, fetchable, nor bundled in " +
                      bundled_dir.string());
}

}  // namespace storyweaver
