#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindkit/common.hpp"

namespace mindkit {

// ---------------------------------------------------------------------------
// Trace: uniformly sampled multichannel voltage time series (mV).
// Stored channel-major; all channels have the same length.
// ---------------------------------------------------------------------------
struct Trace {
    double sample_rate_hz = 400.0;
    std::vector<std::string> channels;
    std::vector<std::vector<double>> volts;  // volts[ch][row], mV
    double t0_s = 0.0;
    // Optional per-sample ground-truth column (angle in degrees or position
    // in mm for motion sessions). Serialized as a trailing `truth` CSV column.
    std::optional<std::vector<double>> truth;

    std::size_t n_channels() const { return channels.size(); }
    std::size_t n_samples() const { return volts.empty() ? 0 : volts.front().size(); }
    double dt_s() const { return 1.0 / sample_rate_hz; }
    double time_at(std::size_t row) const { return t0_s + static_cast<double>(row) / sample_rate_hz; }
    double end_time_s() const { return n_samples() == 0 ? t0_s : time_at(n_samples() - 1); }

    // Index of the first sample at or after time t, clamped to [0, n].
    std::size_t index_at_or_after(double t_s) const {
        const double r = (t_s - t0_s) * sample_rate_hz;
        if (r <= 0.0) return 0;
        const double up = std::ceil(r - 1e-9);
        if (up >= static_cast<double>(n_samples())) return n_samples();
        return static_cast<std::size_t>(up);
    }

    static Trace zeros(std::size_t n_ch, std::size_t n_rows, double fs_hz, double t0 = 0.0) {
        Trace tr;
        tr.sample_rate_hz = fs_hz;
        tr.t0_s = t0;
        tr.channels.reserve(n_ch);
        for (std::size_t c = 0; c < n_ch; ++c) tr.channels.push_back("ch" + std::to_string(c));
        tr.volts.assign(n_ch, std::vector<double>(n_rows, 0.0));
        return tr;
    }
};

// ---------------------------------------------------------------------------
// Stimulus events.
// ---------------------------------------------------------------------------
struct Wall {
    int index = 0;
};
struct Pixel {
    int index = 0;
};
struct AngleDeg {
    double value = 0.0;
};
struct PositionMm {
    double value = 0.0;
};
using Target = std::variant<std::monostate, Wall, Pixel, AngleDeg, PositionMm>;

struct StimulusEvent {
    std::string cls;
    double onset_s = 0.0;
    double duration_s = 0.0;
    double intensity = 0.0;          // stimulus-native units (% brightness, hPa, ppm, ...)
    std::optional<double> loading_rate;  // native units per second
    Target target;

    double offset_s() const { return onset_s + duration_s; }
};

// The fourteen canonical single-stimulus classes.
inline const std::vector<std::string>& stimulus_classes() {
    static const std::vector<std::string> classes = {
        "acetone", "isopropyl alcohol", "co2", "smoke", "map-pro", "propane", "ir",
        "white light", "uvb", "uvc", "pressure", "touch", "temperature", "tar spot"};
    return classes;
}

// Auxiliary optical classes used by paired-stimulus experiments.
inline const std::vector<std::string>& auxiliary_classes() {
    static const std::vector<std::string> classes = {"green light", "blue light"};
    return classes;
}

inline bool is_single_class(const std::string& cls) {
    const auto& c = stimulus_classes();
    if (std::find(c.begin(), c.end(), cls) != c.end()) return true;
    const auto& a = auxiliary_classes();
    return std::find(a.begin(), a.end(), cls) != a.end();
}

// A class is valid if it is a known single class or a '+'-joined pair of them.
inline bool is_known_class(const std::string& cls) {
    if (is_single_class(cls)) return true;
    const auto pos = cls.find('+');
    if (pos == std::string::npos) return false;
    return is_single_class(cls.substr(0, pos)) && is_single_class(cls.substr(pos + 1));
}

// ---------------------------------------------------------------------------
// Session: one recording plus its chronological stimulus log.
// Immutable by convention after validation; all analysis code takes const refs.
// ---------------------------------------------------------------------------
struct Session {
    Trace trace;
    std::vector<StimulusEvent> events;
    std::pair<double, double> baseline_window_s{0.0, 20.0};
    std::map<std::string, std::string> provenance;
};

// Sort events chronologically; ties broken by class name, then target-free order.
inline void sort_events(std::vector<StimulusEvent>& events) {
    std::stable_sort(events.begin(), events.end(), [](const StimulusEvent& a, const StimulusEvent& b) {
        if (a.onset_s != b.onset_s) return a.onset_s < b.onset_s;
        return a.cls < b.cls;
    });
}

// ---------------------------------------------------------------------------
// Validation. Throws Error naming the offending row/field.
// ---------------------------------------------------------------------------
inline void validate_trace(const Trace& trace) {
    if (!(trace.sample_rate_hz > 0.0)) throw Error("trace: sample_rate_hz must be > 0");
    if (trace.channels.empty()) throw Error("trace: no channels");
    const std::size_t n = trace.volts.size();
    if (n != trace.channels.size())
        throw Error("trace: channel label count " + std::to_string(trace.channels.size()) +
                    " does not match data column count " + std::to_string(n));
    const std::size_t rows = trace.n_samples();
    for (std::size_t c = 0; c < n; ++c) {
        if (trace.volts[c].size() != rows)
            throw Error("trace: channel '" + trace.channels[c] + "' has " +
                        std::to_string(trace.volts[c].size()) + " samples, expected " + std::to_string(rows));
        for (std::size_t i = 0; i < trace.volts[c].size(); ++i) {
            if (!std::isfinite(trace.volts[c][i]))
                throw Error("trace: non-finite sample at row " + std::to_string(i) + ", channel '" +
                            trace.channels[c] + "'");
        }
    }
    if (trace.truth && trace.truth->size() != rows)
        throw Error("trace: truth column has " + std::to_string(trace.truth->size()) +
                    " samples, expected " + std::to_string(rows));
}

inline void validate_event(const StimulusEvent& ev, std::size_t idx) {
    const std::string where = "event " + std::to_string(idx);
    if (!is_known_class(ev.cls)) throw Error(where + ": unknown stimulus class '" + ev.cls + "'");
    if (!std::isfinite(ev.onset_s)) throw Error(where + ": non-finite onset_s");
    if (!(ev.duration_s >= 0.0)) throw Error(where + ": duration_s must be >= 0");
    if (!std::isfinite(ev.intensity)) throw Error(where + ": non-finite intensity");
    if (ev.loading_rate && !std::isfinite(*ev.loading_rate)) throw Error(where + ": non-finite loading_rate");
    if (const Wall* w = std::get_if<Wall>(&ev.target)) {
        if (w->index < 0 || w->index > 3) throw Error(where + ": wall index must be in {0,1,2,3}");
    } else if (const Pixel* p = std::get_if<Pixel>(&ev.target)) {
        if (p->index < 0 || p->index > 3) throw Error(where + ": pixel index must be in {0,1,2,3}");
    } else if (const AngleDeg* a = std::get_if<AngleDeg>(&ev.target)) {
        if (!(a->value >= 0.0 && a->value < 360.0))
            throw Error(where + ": angular position must be normalized to [0, 360)");
    } else if (const PositionMm* p = std::get_if<PositionMm>(&ev.target)) {
        if (!std::isfinite(p->value)) throw Error(where + ": non-finite position");
    }
}

inline void validate_session(const Session& session) {
    validate_trace(session.trace);
    for (std::size_t i = 0; i < session.events.size(); ++i) validate_event(session.events[i], i);
    for (std::size_t i = 1; i < session.events.size(); ++i) {
        if (session.events[i].onset_s < session.events[i - 1].onset_s)
            throw Error("events unsorted: event " + std::to_string(i) + " onset " +
                        std::to_string(session.events[i].onset_s) + " precedes event " +
                        std::to_string(i - 1));
    }
    if (session.baseline_window_s.second < session.baseline_window_s.first)
        throw Error("baseline window end precedes start");
    if (!session.events.empty() && session.events.front().onset_s < session.baseline_window_s.second)
        throw Error("baseline window [" + std::to_string(session.baseline_window_s.first) + ", " +
                    std::to_string(session.baseline_window_s.second) + "] overlaps first event onset at " +
                    std::to_string(session.events.front().onset_s));
}

// ---------------------------------------------------------------------------
// Serialization.
//
// Trace CSV: header `time_s,<label>_mV,...[,truth]`, one row per sample,
// voltages quantized to 1 uV. Events: sidecar JSON array. Baseline window and
// provenance: a small sidecar meta JSON next to the other two.
// ---------------------------------------------------------------------------
namespace detail {

inline std::string events_path(const std::string& csv_path) {
    std::string stem = csv_path;
    if (stem.size() >= 4 && stem.substr(stem.size() - 4) == ".csv") stem.resize(stem.size() - 4);
    return stem + ".events.json";
}

inline std::string meta_path(const std::string& csv_path) {
    std::string stem = csv_path;
    if (stem.size() >= 4 && stem.substr(stem.size() - 4) == ".csv") stem.resize(stem.size() - 4);
    return stem + ".meta.json";
}

inline nlohmann::json target_to_json(const Target& t) {
    if (std::holds_alternative<std::monostate>(t)) return nullptr;
    nlohmann::json j;
    if (const Wall* w = std::get_if<Wall>(&t)) j["wall"] = w->index;
    if (const Pixel* p = std::get_if<Pixel>(&t)) j["pixel"] = p->index;
    if (const AngleDeg* a = std::get_if<AngleDeg>(&t)) j["angle_deg"] = a->value;
    if (const PositionMm* p = std::get_if<PositionMm>(&t)) j["pos_mm"] = p->value;
    return j;
}

inline Target target_from_json(const nlohmann::json& j, std::size_t idx) {
    if (j.is_null()) return std::monostate{};
    if (!j.is_object() || j.size() != 1)
        throw Error("event " + std::to_string(idx) + ": target must be null or a single-key object");
    if (j.contains("wall")) return Wall{j.at("wall").get<int>()};
    if (j.contains("pixel")) return Pixel{j.at("pixel").get<int>()};
    if (j.contains("angle_deg")) return AngleDeg{j.at("angle_deg").get<double>()};
    if (j.contains("pos_mm")) return PositionMm{j.at("pos_mm").get<double>()};
    throw Error("event " + std::to_string(idx) + ": unknown target tag '" + j.begin().key() + "'");
}

}  // namespace detail

inline void save_session(const Session& session, const std::string& csv_path) {
    validate_session(session);
    const Trace& tr = session.trace;

    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw Error("cannot open '" + csv_path + "' for writing");
    csv << "time_s";
    for (const auto& ch : tr.channels) csv << "," << ch << "_mV";
    if (tr.truth) csv << ",truth";
    csv << "\n";

    char buf[64];
    const std::size_t rows = tr.n_samples();
    std::string line;
    for (std::size_t i = 0; i < rows; ++i) {
        line.clear();
        std::snprintf(buf, sizeof(buf), "%.6f", tr.time_at(i));
        line += buf;
        for (std::size_t c = 0; c < tr.n_channels(); ++c) {
            std::snprintf(buf, sizeof(buf), ",%.3f", tr.volts[c][i]);  // 1 uV quantum
            line += buf;
        }
        if (tr.truth) {
            std::snprintf(buf, sizeof(buf), ",%.6f", (*tr.truth)[i]);
            line += buf;
        }
        line += "\n";
        csv << line;
    }
    if (!csv) throw Error("write failed for '" + csv_path + "'");
    csv.close();

    nlohmann::json events = nlohmann::json::array();
    for (const auto& ev : session.events) {
        nlohmann::json e;
        e["class"] = ev.cls;
        e["onset_s"] = ev.onset_s;
        e["duration_s"] = ev.duration_s;
        e["intensity"] = ev.intensity;
        e["loading_rate"] = ev.loading_rate ? nlohmann::json(*ev.loading_rate) : nlohmann::json(nullptr);
        e["target"] = detail::target_to_json(ev.target);
        events.push_back(std::move(e));
    }
    std::ofstream ej(detail::events_path(csv_path), std::ios::binary);
    if (!ej) throw Error("cannot open '" + detail::events_path(csv_path) + "' for writing");
    ej << events.dump(2) << "\n";

    nlohmann::json meta;
    meta["baseline_window_s"] = {session.baseline_window_s.first, session.baseline_window_s.second};
    meta["provenance"] = session.provenance;
    std::ofstream mj(detail::meta_path(csv_path), std::ios::binary);
    if (!mj) throw Error("cannot open '" + detail::meta_path(csv_path) + "' for writing");
    mj << meta.dump(2) << "\n";
}

inline Session load_session(const std::string& csv_path) {
    std::ifstream csv(csv_path, std::ios::binary);
    if (!csv) throw Error("missing file: '" + csv_path + "'");

    Session session;
    Trace& tr = session.trace;

    std::string header;
    if (!std::getline(csv, header)) throw Error(csv_path + ": empty file");
    auto cols = split(trim(header), ',');
    if (cols.empty() || trim(cols[0]) != "time_s")
        throw Error(csv_path + ": malformed header: first column must be 'time_s'");
    bool has_truth = false;
    for (std::size_t c = 1; c < cols.size(); ++c) {
        std::string_view col = trim(cols[c]);
        if (col == "truth") {
            if (c + 1 != cols.size()) throw Error(csv_path + ": 'truth' must be the last column");
            has_truth = true;
        } else if (col.size() > 3 && col.substr(col.size() - 3) == "_mV") {
            tr.channels.emplace_back(col.substr(0, col.size() - 3));
        } else {
            throw Error(csv_path + ": malformed header: column '" + std::string(col) +
                        "' must end in '_mV' (or be a final 'truth')");
        }
    }
    if (tr.channels.empty()) throw Error(csv_path + ": malformed header: no channel columns");

    const std::size_t n_cols = 1 + tr.channels.size() + (has_truth ? 1 : 0);
    tr.volts.assign(tr.channels.size(), {});
    if (has_truth) tr.truth.emplace();
    std::vector<double> times;

    std::string line;
    std::size_t row = 0;
    while (std::getline(csv, line)) {
        std::string_view sv = trim(line);
        if (sv.empty()) continue;
        auto fields = split(sv, ',');
        if (fields.size() != n_cols)
            throw Error(csv_path + ": row " + std::to_string(row + 1) + " has " +
                        std::to_string(fields.size()) + " values, expected " + std::to_string(n_cols));
        auto parse_field = [&](std::string_view f, const char* what) {
            auto v = try_parse_double(f);
            if (!v)
                throw Error(csv_path + ": row " + std::to_string(row + 1) + ": cannot parse " + what +
                            " '" + std::string(f) + "'");
            if (!std::isfinite(*v))
                throw Error(csv_path + ": row " + std::to_string(row + 1) + ": non-finite " + what);
            return *v;
        };
        times.push_back(parse_field(fields[0], "time"));
        for (std::size_t c = 0; c < tr.channels.size(); ++c)
            tr.volts[c].push_back(parse_field(fields[1 + c], "voltage"));
        if (has_truth) tr.truth->push_back(parse_field(fields.back(), "truth"));
        ++row;
    }
    if (times.empty()) throw Error(csv_path + ": no sample rows");

    tr.t0_s = times.front();
    if (times.size() >= 2) {
        const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
        if (!(dt > 0)) throw Error(csv_path + ": time column is not increasing");
        tr.sample_rate_hz = 1.0 / dt;
        for (std::size_t i = 1; i < times.size(); ++i) {
            const double step = times[i] - times[i - 1];
            if (std::abs(step - dt) > 0.5 * dt + 1e-9)
                throw Error(csv_path + ": non-uniform sampling at row " + std::to_string(i + 1));
        }
    }

    const std::string epath = detail::events_path(csv_path);
    std::ifstream ej(epath, std::ios::binary);
    if (!ej) throw Error("missing file: '" + epath + "'");
    nlohmann::json events_json;
    try {
        ej >> events_json;
    } catch (const nlohmann::json::exception& e) {
        throw Error(epath + ": malformed JSON: " + e.what());
    }
    if (!events_json.is_array()) throw Error(epath + ": event log must be a JSON array");
    for (std::size_t i = 0; i < events_json.size(); ++i) {
        const auto& e = events_json[i];
        StimulusEvent ev;
        try {
            ev.cls = e.at("class").get<std::string>();
            ev.onset_s = e.at("onset_s").get<double>();
            ev.duration_s = e.at("duration_s").get<double>();
            ev.intensity = e.at("intensity").get<double>();
            if (!e.at("loading_rate").is_null()) ev.loading_rate = e.at("loading_rate").get<double>();
            ev.target = detail::target_from_json(e.at("target"), i);
        } catch (const nlohmann::json::exception& ex) {
            throw Error(epath + ": event " + std::to_string(i) + ": " + ex.what());
        }
        session.events.push_back(std::move(ev));
    }

    const std::string mpath = detail::meta_path(csv_path);
    std::ifstream mj(mpath, std::ios::binary);
    if (mj) {
        nlohmann::json meta;
        try {
            mj >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw Error(mpath + ": malformed JSON: " + e.what());
        }
        if (meta.contains("baseline_window_s")) {
            session.baseline_window_s.first = meta["baseline_window_s"].at(0).get<double>();
            session.baseline_window_s.second = meta["baseline_window_s"].at(1).get<double>();
        }
        if (meta.contains("provenance"))
            session.provenance = meta["provenance"].get<std::map<std::string, std::string>>();
    }

    validate_session(session);
    return session;
}

// ---------------------------------------------------------------------------
// Per-event windowing: one window per event covering
// [onset - pre, onset + duration + post], clipped to the trace bounds.
// ---------------------------------------------------------------------------
inline std::vector<std::pair<StimulusEvent, Trace>> slice_events(const Session& session, double pre_s,
                                                                 double post_s) {
    if (pre_s < 0 || post_s < 0) throw Error("slice_events: pre_s and post_s must be >= 0");
    const Trace& tr = session.trace;
    std::vector<std::pair<StimulusEvent, Trace>> out;
    out.reserve(session.events.size());
    for (const auto& ev : session.events) {
        const double t_lo = ev.onset_s - pre_s;
        const double t_hi = ev.offset_s() + post_s;
        std::size_t i0 = tr.index_at_or_after(t_lo);
        // last sample at or before t_hi, then half-open end
        std::size_t i1 = tr.index_at_or_after(t_hi);
        if (i1 < tr.n_samples() && tr.time_at(i1) <= t_hi + 1e-9) ++i1;
        if (i0 >= i1) {
            i0 = std::min(i0, tr.n_samples() - 1);
            i1 = i0 + 1;  // degenerate one-sample window at the clip boundary
        }
        Trace w;
        w.sample_rate_hz = tr.sample_rate_hz;
        w.channels = tr.channels;
        w.t0_s = tr.time_at(i0);
        w.volts.reserve(tr.n_channels());
        for (std::size_t c = 0; c < tr.n_channels(); ++c)
            w.volts.emplace_back(tr.volts[c].begin() + i0, tr.volts[c].begin() + i1);
        if (tr.truth)
            w.truth.emplace(tr.truth->begin() + i0, tr.truth->begin() + i1);
        out.emplace_back(ev, std::move(w));
    }
    return out;
}

}  // namespace mindkit
