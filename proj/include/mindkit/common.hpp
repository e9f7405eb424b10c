#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mindkit {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Wrap an angle in radians into [0, 2*pi).
inline double wrap_2pi(double rad) {
    double r = std::fmod(rad, kTwoPi);
    if (r < 0) r += kTwoPi;
    // fmod can return exactly 2*pi after the correction when rad is a tiny negative number
    if (r >= kTwoPi) r = 0.0;
    return r;
}

// Wrap an angle in degrees into [-180, 180).
inline double wrap_deg180(double deg) {
    double r = std::fmod(deg + 180.0, 360.0);
    if (r < 0) r += 360.0;
    return r - 180.0;
}

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// splitmix64 core with hand-rolled Box-Muller normals, so that streams are
// bit-reproducible across platforms and standard-library versions. Substreams
// are derived by hashing (seed, stream) and never share state.
// ---------------------------------------------------------------------------

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // warm up so that small consecutive seeds decorrelate
        detail::splitmix64(state_);
        detail::splitmix64(state_);
    }

    // Independent substream identified by (seed, stream).
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        std::uint64_t a = detail::splitmix64(s);
        s ^= stream * 0xD1B54A32D192ED03ull + 0x9E3779B97F4A7C15ull;
        std::uint64_t b = detail::splitmix64(s);
        return Rng(a ^ (b + 0x165667B19E3779F9ull));
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Standard normal via Box-Muller; second value of each pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = kTwoPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Small parsing helpers shared by the CSV reader and the key=value configs.
// ---------------------------------------------------------------------------

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> try_parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

// Plain-text key=value configuration ('#' starts a comment line).
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse(std::string_view text) {
        KvConfig cfg;
        std::size_t line_no = 0;
        for (std::string_view line : split(text, '\n')) {
            ++line_no;
            line = trim(line);
            if (line.empty() || line.front() == '#') continue;
            std::size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw Error("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                            std::string(line) + "'");
            std::string key(trim(line.substr(0, eq)));
            std::string val(trim(line.substr(eq + 1)));
            if (key.empty())
                throw Error("config line " + std::to_string(line_no) + ": empty key");
            cfg.values_[key] = val;
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw Error("config: missing required key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        auto v = try_parse_double(it->second);
        if (!v) throw Error("config: key '" + key + "' is not a number: '" + it->second + "'");
        return *v;
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        double v = get_double(key, static_cast<double>(fallback));
        return static_cast<std::int64_t>(std::llround(v));
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace mindkit
