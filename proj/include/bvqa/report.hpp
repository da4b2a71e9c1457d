#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bvqa/errors.hpp"
#include "bvqa/pattern.hpp"
#include "bvqa/protocol.hpp"
#include "bvqa/vqa.hpp"

namespace bvqa {

/// Shortest round-trip decimal text (std::to_chars): locale-free and
/// deterministic, so equal doubles always serialize to equal bytes. NaN
/// renders as an empty cell -- the CSV convention here for "not applicable".
[[nodiscard]] inline std::string format_double(double v) {
    if (std::isnan(v)) return {};
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf.data(), end);
}

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

/// One summary.csv row. Numeric fields default to "not applicable"; every
/// experiment fills what it measured plus its trial count and seed.
struct SummaryRow {
    std::string experiment;
    int n = 0;
    int m = 0;
    int attack_weight = 0;
    std::uint64_t trials = 0;
    double escape_rate = kNotApplicable;
    double bound = kNotApplicable;
    double resends_mean = kNotApplicable;
    double accepted_rate = kNotApplicable;
    std::uint64_t seed = 0;
};

inline constexpr std::string_view kSummaryHeader =
    "experiment,N,M,attack_weight,trials,escape_rate,bound,resends_mean,accepted_rate,seed";

[[nodiscard]] inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out{kSummaryHeader};
    out += '\n';
    for (const SummaryRow& r : rows) {
        out += r.experiment;
        out += ',' + std::to_string(r.n) + ',' + std::to_string(r.m) + ',' +
               std::to_string(r.attack_weight) + ',' + std::to_string(r.trials) + ',' +
               format_double(r.escape_rate) + ',' + format_double(r.bound) + ',' +
               format_double(r.resends_mean) + ',' + format_double(r.accepted_rate) + ',' +
               std::to_string(r.seed) + '\n';
    }
    return out;
}

/// One plotdata.csv row; `series` groups rows belonging to one curve.
struct PlotPoint {
    std::string series;
    double x = 0.0;
    double y = 0.0;
    double error = 0.0;
};

[[nodiscard]] inline std::string plotdata_csv(const std::vector<PlotPoint>& points) {
    std::string out = "series,x,y,error\n";
    for (const PlotPoint& p : points) {
        out += p.series + ',' + format_double(p.x) + ',' + format_double(p.y) + ',' +
               format_double(p.error) + '\n';
    }
    return out;
}

/// Training log: one row per iteration with the gradient's L2 norm and the
/// full parameter snapshot.
[[nodiscard]] inline std::string train_csv(const std::vector<TrainRecord>& records) {
    const std::size_t L = records.empty() ? 0 : records.front().theta.size();
    std::string out = "iteration,cost,grad_norm,aborted";
    for (std::size_t j = 0; j < L; ++j) out += ",theta_" + std::to_string(j);
    out += '\n';
    for (const TrainRecord& r : records) {
        double norm2 = 0.0;
        for (const double g : r.grad) norm2 += g * g;
        out += std::to_string(r.iteration) + ',' + format_double(r.cost) + ',' +
               format_double(std::sqrt(norm2)) + ',' + std::to_string(r.aborted);
        for (const double t : r.theta) out += ',' + format_double(t);
        out += '\n';
    }
    return out;
}

[[nodiscard]] inline std::string_view event_kind_name(Event::Kind k) {
    switch (k) {
        case Event::Kind::BellSent: return "bell_sent";
        case Event::Kind::RecvStatus: return "recv_status";
        case Event::Kind::S1S2: return "s1_s2";
        case Event::Kind::PhiPrime: return "phi_prime";
        case Event::Kind::S3: return "s3";
        case Event::Kind::OutputBits: return "output_bits";
        case Event::Kind::Abort: return "abort";
    }
    return "unknown";
}

/// One transcript event as a flat record: run id, monotone sequence number,
/// seed label, event name, then the event's own payload fields.
[[nodiscard]] inline nlohmann::ordered_json event_json(const Transcript& t, const Event& e) {
    nlohmann::ordered_json j;
    j["run"] = t.run_id();
    j["seq"] = e.seq;
    j["seed"] = t.seed();
    j["event"] = event_kind_name(e.kind);
    switch (e.kind) {
        case Event::Kind::BellSent: j["gadget"] = e.gadget; break;
        case Event::Kind::RecvStatus:
            j["gadget"] = e.gadget;
            j["status"] = e.bit_a;
            break;
        case Event::Kind::S1S2:
            j["gadget"] = e.gadget;
            j["s1"] = e.bit_a;
            j["s2"] = e.bit_b;
            break;
        case Event::Kind::PhiPrime:
            j["gadget"] = e.gadget;
            j["angle"] = e.angle;
            break;
        case Event::Kind::S3:
            j["gadget"] = e.gadget;
            j["s3"] = e.bit_a;
            break;
        case Event::Kind::OutputBits: j["bits"] = e.bits; break;
        case Event::Kind::Abort: j["reason"] = e.reason; break;
    }
    return j;
}

/// Line-delimited transcript: one event record per line, in sequence order.
[[nodiscard]] inline std::string transcript_jsonl(const Transcript& t) {
    std::string out;
    for (const Event& e : t.events()) {
        out += event_json(t, e).dump();
        out += '\n';
    }
    return out;
}

/// The server-visible part of a compiled pattern: shape only. Angles, trap
/// layout, permutation, and basis-change positions never appear here.
[[nodiscard]] inline nlohmann::ordered_json pattern_public_json(const PatternCircuit& pat) {
    nlohmann::ordered_json j;
    j["wires"] = pat.n;
    j["depth"] = pat.depth;
    j["wire_pairs"] = pat.pairs();
    j["slots_per_wire"] = kBrickSlots;
    j["gadgets"] = pat.gadget_count();
    return j;
}

/// Everything the server receives from the client over one run, in order:
/// the public shape it was hired for, the reception-status stream, and the
/// encrypted-angle stream. Any other value in the system is either
/// server-generated or client-secret.
[[nodiscard]] inline nlohmann::ordered_json server_view_json(const PatternCircuit& pat,
                                                             const Transcript& t) {
    // Build sub-arrays first: ordered_json keys live in a vector, so holding
    // a reference into j across another insertion would dangle.
    auto statuses = nlohmann::ordered_json::array();
    auto angles = nlohmann::ordered_json::array();
    for (const Event& e : t.events()) {
        if (e.kind == Event::Kind::RecvStatus) statuses.push_back(e.bit_a);
        if (e.kind == Event::Kind::PhiPrime) angles.push_back(e.angle);
    }
    nlohmann::ordered_json j;
    j["pattern"] = pattern_public_json(pat);
    j["recv_status"] = std::move(statuses);
    j["phi_prime"] = std::move(angles);
    return j;
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace bvqa
