// Frame-error campaigns. Every frame draws its own random stream derived
// from the point seed and the frame index, and outcomes are committed in
// frame order with the stopping rule applied to committed counts only, so a
// campaign produces identical records for any worker count. Sweeps derive
// one seed per grid point from the master seed, which lets an interrupted
// campaign resume point by point with nothing changed.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pcm/channel.hpp"
#include "pcm/list_decoder.hpp"
#include "pcm/polar.hpp"
#include "pcm/rng.hpp"
#include "pcm/util.hpp"

namespace pcm {

struct SweepPoint {
    double p_av_db = 0.0;  // average power per slot, P_av = n_s/M in dB
    double n_s = 0.0;      // M * 10^{p_av_db/10}, logged exactly as derived
};

inline SweepPoint sweep_point(unsigned M, double p_av_db) {
    return {p_av_db, ns_from_pav_db(M, p_av_db)};
}

struct RunOptions {
    unsigned L_max = 32;             // ladder cap with a CRC, fixed list size without
    std::uint64_t stop_errors = 50;  // end the point after this many frame errors
    std::uint64_t max_frames = 1000000;
    unsigned workers = 1;
    DecoderOptions decoder{};
};

struct SimRecord {
    SweepPoint point;
    std::uint64_t frames = 0;
    std::uint64_t frame_errors = 0;
    std::uint64_t bit_errors = 0;  // over information bits only
    unsigned info_bits_per_frame = 0;
    std::map<unsigned, std::uint64_t> list_histogram;  // list size -> frames returned there
    std::uint64_t seed = 0;
    bool reached_target = false;  // false when max_frames ended the point early

    double cer() const {
        return frames ? static_cast<double>(frame_errors) / static_cast<double>(frames) : 0.0;
    }
    double ber() const {
        if (!frames || !info_bits_per_frame)
            return 0.0;
        return static_cast<double>(bit_errors) /
               (static_cast<double>(frames) * info_bits_per_frame);
    }
};

namespace detail {

struct FrameOutcome {
    std::uint32_t bit_errors = 0;
    unsigned list_size = 0;
    bool frame_error = false;
};

// One frame end to end: random info word, encode, transmit, decode, compare.
// A frame counts as an error when the CRC never passed or the selected word
// differs from the transmitted one; an undetected CRC pass on a wrong word
// still contributes its bit errors.
inline FrameOutcome simulate_frame(ListDecoder& decoder, const CodeSpec& spec,
                                   const ChannelParams& params, const RunOptions& opts,
                                   RandomStream& rng) {
    std::vector<std::uint8_t> info = rng.bits(spec.k_info);
    Encoded tx = encode(info, spec);
    std::vector<PhotonVector> y(spec.n_used);
    for (unsigned t = 0; t < spec.n_used; ++t)
        y[t] = sample_symbol(tx.positions[t], params, rng);

    std::vector<std::uint8_t> chosen;
    bool crc_ok = !spec.crc.has_value();  // nothing to fail without an outer code
    unsigned returned_at = opts.L_max;
    if (spec.crc && opts.L_max >= 32 && is_pow2(opts.L_max)) {
        DynamicResult res = decoder.decode_dynamic(y, opts.L_max);
        chosen = std::move(res.info);
        crc_ok = res.crc_ok;
        returned_at = res.list_size;
    } else {
        std::vector<Candidate> candidates = decoder.decode(y, opts.L_max);
        std::size_t pick = 0;
        if (spec.crc) {
            for (std::size_t i = 0; i < candidates.size(); ++i)
                if (candidates[i].crc_ok) {
                    pick = i;
                    crc_ok = true;
                    break;
                }
        }
        chosen = std::move(candidates[pick].info);
    }

    FrameOutcome out;
    out.list_size = returned_at;
    for (unsigned i = 0; i < spec.k_info; ++i)
        out.bit_errors += chosen[i] != info[i];
    out.frame_error = !crc_ok || out.bit_errors != 0;
    return out;
}

}  // namespace detail

// Simulate one operating point until stop_errors frame errors have been
// committed or max_frames frames are exhausted, whichever comes first.
inline SimRecord run_point(const CodeSpec& spec, const ChannelParams& params,
                           const RunOptions& opts, std::uint64_t seed) {
    if (opts.stop_errors < 1)
        throw std::invalid_argument("run_point: stop_errors must be at least 1");
    if (opts.max_frames < 1)
        throw std::invalid_argument("run_point: max_frames must be at least 1");
    if (opts.L_max < 1)
        throw std::invalid_argument("run_point: L_max must be at least 1");
    const unsigned workers = std::max(1u, opts.workers);

    SimRecord record;
    record.point = {pav_db_from_ns(params.M, params.n_s), params.n_s};
    record.info_bits_per_frame = spec.k_info;
    record.seed = seed;

    // Frames are issued in fixed-size batches sharded over the workers and
    // committed in frame order; batch size only trades surplus work against
    // thread churn and never shows in the results.
    const std::uint64_t batch = std::uint64_t{32} * workers;
    std::uint64_t issued = 0;
    bool stopped = false;
    while (!stopped && issued < opts.max_frames) {
        const std::uint64_t count = std::min(batch, opts.max_frames - issued);
        std::vector<detail::FrameOutcome> outcomes(count);
        auto shard = [&](unsigned w) {
            ListDecoder decoder(spec, params, opts.decoder);
            for (std::uint64_t i = w; i < count; i += workers) {
                RandomStream rng = derive_stream(seed, issued + i);
                outcomes[i] = detail::simulate_frame(decoder, spec, params, opts, rng);
            }
        };
        if (workers == 1) {
            shard(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (unsigned w = 0; w < workers; ++w)
                pool.emplace_back(shard, w);
            for (std::thread& t : pool)
                t.join();
        }
        for (std::uint64_t i = 0; i < count && !stopped; ++i) {
            const detail::FrameOutcome& out = outcomes[i];
            record.frames += 1;
            record.frame_errors += out.frame_error;
            record.bit_errors += out.bit_errors;
            record.list_histogram[out.list_size] += 1;
            if (record.frame_errors >= opts.stop_errors) {
                record.reached_target = true;
                stopped = true;
            }
        }
        issued += count;
    }
    return record;
}

struct SweepConfig {
    std::vector<double> p_av_db;  // grid of operating points
    double n_b = 0.0;
    RunOptions run{};
    std::uint64_t master_seed = 0;
};

// Run every grid point whose `already_done` predicate is false, invoking
// `on_record` as each point completes. Per-point seeds depend only on the
// master seed and the point's grid index, so skipping completed points on a
// resumed run reproduces exactly the records an uninterrupted run would have
// produced.
inline std::vector<SimRecord> run_sweep(const CodeSpec& spec, const SweepConfig& config,
                                        const std::function<bool(double)>& already_done = {},
                                        const std::function<void(const SimRecord&)>& on_record = {}) {
    std::vector<SimRecord> records;
    for (std::size_t i = 0; i < config.p_av_db.size(); ++i) {
        const double p = config.p_av_db[i];
        if (already_done && already_done(p))
            continue;
        const std::uint64_t point_seed = derive_stream(config.master_seed, i).next_u64();
        SweepPoint point = sweep_point(spec.M(), p);
        ChannelParams params(spec.M(), point.n_s, config.n_b);
        SimRecord record = run_point(spec, params, config.run, point_seed);
        record.point = point;  // keep the grid value and its exact n_s as logged
        if (on_record)
            on_record(record);
        records.push_back(std::move(record));
    }
    return records;
}

// ---- plain-text result tables ----------------------------------------------

struct ResultRow {
    double p_av_db = 0.0;
    double cer = 0.0;
    double ber = 0.0;
    std::uint64_t frames = 0;
    std::uint64_t frame_errors = 0;
};

inline void write_results_header(std::ostream& out, const std::string& configuration) {
    if (!configuration.empty())
        out << "# " << configuration << "\n";
    out << "# P CER BER frames frame_errors\n";
}

inline void append_result(std::ostream& out, const SimRecord& record) {
    if (!record.reached_target)
        out << "# next point stopped at max_frames before reaching the error target\n";
    out << format_double(record.point.p_av_db) << " " << format_double(record.cer()) << " "
        << format_double(record.ber()) << " " << record.frames << " " << record.frame_errors
        << "\n";
}

// One histogram block per operating point: rows are `L count` and sum to the
// point's frame total; frames that never passed the CRC sit in the L_max row.
inline void append_histogram(std::ostream& out, const SimRecord& record) {
    out << "# P " << format_double(record.point.p_av_db) << "\n";
    for (const auto& [list_size, count] : record.list_histogram)
        out << list_size << " " << count << "\n";
}

inline std::vector<ResultRow> read_results(std::istream& in) {
    std::vector<ResultRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string first;
        if (!(fields >> first) || first[0] == '#')
            continue;
        ResultRow row;
        std::istringstream head(first);
        if (!(head >> row.p_av_db) || !(fields >> row.cer >> row.ber >> row.frames >>
                                        row.frame_errors))
            throw std::runtime_error("results file: malformed line: " + line);
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<ResultRow> read_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("results file: cannot open '" + path.string() + "'");
    return read_results(in);
}

}  // namespace pcm
