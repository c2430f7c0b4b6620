// polarppm: capacity tables, per-level mutual-information profiles, frozen-set
// construction, and frame-error campaigns for polar-coded PPM on the slotted
// photon-counting channel.
//
// Subcommands: capacity, mi, construct, simulate. Every command is
// deterministic given --seed (a missing seed is drawn and logged), every
// output starts with a `#` header echoing the effective configuration, and
// exit codes are 0 success / 2 usage / 3 I/O / 4 resource.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcm/channel.hpp"
#include "pcm/code_file.hpp"
#include "pcm/construction.hpp"
#include "pcm/harness.hpp"
#include "pcm/modulation.hpp"
#include "pcm/polar.hpp"
#include "pcm/rng.hpp"
#include "pcm/util.hpp"

namespace {

using namespace pcm;

double parse_number(const std::string& text, const char* flag) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw std::invalid_argument(std::string(flag) + ": malformed number '" + text + "'");
    return value;
}

// "v" or "start:stop:step", both ends included when the step divides the span
std::vector<double> parse_pav_range(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = text.find(':', pos);
        parts.push_back(text.substr(pos, next == std::string::npos ? next : next - pos));
        if (next == std::string::npos)
            break;
        pos = next + 1;
    }
    if (parts.size() == 1)
        return {parse_number(parts[0], "--pav")};
    if (parts.size() != 3)
        throw std::invalid_argument("--pav expects a value or start:stop:step");
    double start = parse_number(parts[0], "--pav");
    double stop = parse_number(parts[1], "--pav");
    double step = parse_number(parts[2], "--pav");
    if (step == 0.0) {
        if (start == stop)
            return {start};
        throw std::invalid_argument("--pav: step must be nonzero");
    }
    if ((stop - start) * step < 0.0)
        throw std::invalid_argument("--pav: step must move from start toward stop");
    std::vector<double> points;
    double tol = 1e-9 * std::max(1.0, std::abs(step));
    for (int k = 0;; ++k) {
        double value = start + k * step;
        if (step > 0.0 ? value > stop + tol : value < stop - tol)
            break;
        points.push_back(value);
    }
    return points;
}

// "hex:degree" in Koopman form, e.g. 0x27cf:14; "none" disables the CRC
std::optional<CrcSpec> parse_crc_flag(const std::string& text) {
    if (text.empty() || text == "none")
        return std::nullopt;
    std::size_t colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("--crc expects hex:degree, e.g. 0x27cf:14");
    std::string hex = text.substr(0, colon);
    std::string deg = text.substr(colon + 1);
    if (hex.rfind("0x", 0) == 0 || hex.rfind("0X", 0) == 0)
        hex.erase(0, 2);
    std::uint64_t poly = 0;
    auto [hp, hec] = std::from_chars(hex.data(), hex.data() + hex.size(), poly, 16);
    if (hec != std::errc{} || hp != hex.data() + hex.size())
        throw std::invalid_argument("--crc: malformed polynomial '" + text + "'");
    unsigned degree = 0;
    auto [dp, dec] = std::from_chars(deg.data(), deg.data() + deg.size(), degree);
    if (dec != std::errc{} || dp != deg.data() + deg.size())
        throw std::invalid_argument("--crc: malformed degree '" + text + "'");
    return CrcSpec(degree, poly);  // the constructor validates width against degree
}

std::string crc_flag_text(const std::optional<CrcSpec>& crc) {
    if (!crc)
        return "none";
    return detail::format_hex(crc->poly) + ":" + std::to_string(crc->degree);
}

ConstructionMethod parse_method_flag(const std::string& name) {
    if (name == "mc")
        return ConstructionMethod::mc;
    if (name == "mi-dga" || name == "ga")
        return ConstructionMethod::mi_dga;
    if (name == "mi-dbec" || name == "bec")
        return ConstructionMethod::mi_dbec;
    throw std::invalid_argument("--method must be one of mc, mi-dga, mi-dbec");
}

std::uint64_t effective_seed(const std::optional<std::uint64_t>& given) {
    if (given)
        return *given;
    std::random_device device;
    std::uint64_t seed = (std::uint64_t{device()} << 32) ^ device();
    std::cerr << "# seed " << seed << " (drawn; pass --seed " << seed << " to reproduce)\n";
    return seed;
}

// run `emit` against stdout or a freshly opened file
template <typename Fn>
void with_output(const std::string& path, Fn&& emit) {
    if (path.empty()) {
        emit(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    emit(out);
    out.flush();
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

// closed-form per-level profile of the dark-count-free channel: any photon
// pins the symbol, so every level is an erasure channel with rate 1-e^{-n_s}
MiProfile zero_noise_profile(const ChannelParams& params) {
    MiProfile profile;
    profile.per_level_mi.assign(params.levels(), -std::expm1(-params.n_s));
    profile.standard_errors.assign(params.levels(), 0.0);
    profile.sum_mi = params.levels() * -std::expm1(-params.n_s);
    profile.sum_stderr = 0.0;
    return profile;
}

struct CapacityArgs {
    unsigned M = 0;
    double nb = 0.0;
    std::string pav;
    std::size_t samples = 100000;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_capacity(const CapacityArgs& args) {
    std::vector<double> grid = parse_pav_range(args.pav);
    std::uint64_t seed = effective_seed(args.seed);
    with_output(args.out, [&](std::ostream& out) {
        out << "# polarppm capacity --M " << args.M << " --nb " << format_double(args.nb)
            << " --pav " << args.pav << " --samples " << args.samples << " --seed " << seed
            << "\n";
        out << "# P cm bicm\n";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            ChannelParams params(args.M, ns_from_pav_db(args.M, grid[i]), args.nb);
            double cm = 0.0, bicm = 0.0;
            if (args.nb == 0.0) {
                cm = ppm_capacity_zero_noise(params);
                bicm = cm;  // every level is the same erasure channel, the sum telescopes
            } else {
                RandomStream rng = derive_stream(seed, i);
                cm = ppm_capacity(params, args.samples, rng).value;
                bicm = bmd_rate(params, args.samples, rng).value;
            }
            out << format_double(grid[i]) << " " << format_double(cm) << " "
                << format_double(bicm) << "\n";
        }
    });
    return 0;
}

struct MiArgs {
    unsigned M = 0;
    double nb = 0.0;
    std::string pav;
    std::size_t samples = 100000;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_mi(const MiArgs& args) {
    std::vector<double> grid = parse_pav_range(args.pav);
    if (grid.size() != 1)
        throw std::invalid_argument("mi profiles a single power point; pass one --pav value");
    std::uint64_t seed = effective_seed(args.seed);
    ChannelParams params(args.M, ns_from_pav_db(args.M, grid[0]), args.nb);

    MiProfile profile;
    double capacity = 0.0, capacity_stderr = 0.0;
    if (args.nb == 0.0) {
        profile = zero_noise_profile(params);
        capacity = ppm_capacity_zero_noise(params);
    } else {
        RandomStream rng(seed);
        profile = level_mi_profile(params, args.samples, rng);
        McEstimate cap = ppm_capacity(params, args.samples, rng);
        capacity = cap.value;
        capacity_stderr = cap.std_err;
    }

    with_output(args.out, [&](std::ostream& out) {
        out << "# polarppm mi --M " << args.M << " --nb " << format_double(args.nb) << " --pav "
            << args.pav << " --samples " << args.samples << " --seed " << seed << "\n";
        out << "# level mi stderr\n";
        for (std::size_t j = 0; j < profile.per_level_mi.size(); ++j)
            out << (j + 1) << " " << format_double(profile.per_level_mi[j]) << " "
                << format_double(profile.standard_errors[j]) << "\n";
        out << "# sum " << format_double(profile.sum_mi) << " "
            << format_double(profile.sum_stderr) << "\n";
        out << "# M*C " << format_double(args.M * capacity) << " "
            << format_double(args.M * capacity_stderr) << "\n";
    });
    return 0;
}

struct ConstructArgs {
    unsigned M = 0;
    double nb = 0.0;
    std::string pav;
    unsigned n = 0;
    unsigned shorten = 0;
    double rate = 0.0;
    std::string crc = "none";
    std::string method = "mi-dga";
    std::size_t samples = 100000;
    std::uint64_t trials = 100000;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_construct(const ConstructArgs& args) {
    if (!is_pow2(args.n))
        throw std::invalid_argument("--n must be a power of two (shorten with --shorten)");
    if (args.shorten >= args.n)
        throw std::invalid_argument("--shorten must leave at least one used position");
    if (!(args.rate > 0.0) || args.rate > 1.0)
        throw std::invalid_argument("--rate must lie in (0, 1]");
    std::vector<double> grid = parse_pav_range(args.pav);
    if (grid.size() != 1)
        throw std::invalid_argument("construct targets a single power point; pass one --pav value");

    if (args.M < 2 || !is_pow2(args.M))
        throw std::invalid_argument("--M must be a power of two >= 2");

    ConstructionMethod method = parse_method_flag(args.method);
    std::optional<CrcSpec> crc = parse_crc_flag(args.crc);
    unsigned m = ilog2(args.M);
    unsigned n_used = args.n - args.shorten;
    auto k_info = static_cast<unsigned>(std::llround(args.rate * m * n_used));
    if (k_info < 1)
        throw std::invalid_argument("--rate leaves no information bits at this block length");

    std::uint64_t seed = effective_seed(args.seed);
    ChannelParams params(args.M, ns_from_pav_db(args.M, grid[0]), args.nb);
    ConstructionTarget target{args.n, n_used, k_info, crc};
    RandomStream rng(seed);

    CodeSpec spec;
    if (method == ConstructionMethod::mc) {
        spec = construct_mc(params, target, args.trials, rng);
    } else {
        MiProfile profile = args.nb == 0.0 ? zero_noise_profile(params)
                                           : level_mi_profile(params, args.samples, rng);
        SurrogateRule rule = method == ConstructionMethod::mi_dga ? SurrogateRule::ga
                                                                  : SurrogateRule::bec;
        spec = construct_surrogate(profile, target, rule);
    }

    CodeFile file{std::move(spec), method, params.n_s, params.n_b, seed};
    with_output(args.out, [&](std::ostream& out) {
        out << "# polarppm construct --M " << args.M << " --nb " << format_double(args.nb)
            << " --pav " << args.pav << " --n " << args.n << " --shorten " << args.shorten
            << " --rate " << format_double(args.rate) << " --crc " << crc_flag_text(crc)
            << " --method " << method_name(method)
            << (method == ConstructionMethod::mc
                    ? " --trials " + std::to_string(args.trials)
                    : " --samples " + std::to_string(args.samples))
            << " --seed " << seed << "\n";
        write_code_file(out, file);
    });
    return 0;
}

struct SimulateArgs {
    std::string code;
    std::string pav;
    std::optional<double> nb;
    unsigned lmax = 32;
    std::uint64_t stop_errors = 50;
    std::uint64_t max_frames = 1000000;
    unsigned workers = 1;
    bool min_sum = false;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool resume = false;
};

int cmd_simulate(const SimulateArgs& args) {
    if (args.resume && !args.seed)
        throw std::invalid_argument(
            "--resume must replay the original --seed to extend a campaign");
    if (args.workers < 1)
        throw std::invalid_argument("--workers must be at least 1");

    CodeFile code = read_code_file(std::filesystem::path(args.code));
    double nb = args.nb ? *args.nb : code.n_b;
    std::vector<double> grid = parse_pav_range(args.pav);
    std::uint64_t seed = effective_seed(args.seed);

    std::vector<double> done;
    bool fresh = true;
    if (args.resume && std::filesystem::exists(args.out)) {
        for (const ResultRow& row : read_results(std::filesystem::path(args.out)))
            done.push_back(row.p_av_db);
        fresh = false;
    }

    std::string hist_path = args.out + ".hist";
    std::ios_base::openmode mode = fresh ? std::ios_base::trunc : std::ios_base::app;
    std::ofstream results(args.out, mode);
    if (!results)
        throw std::runtime_error("cannot open '" + args.out + "' for writing");
    std::ofstream hist(hist_path, mode);
    if (!hist)
        throw std::runtime_error("cannot open '" + hist_path + "' for writing");

    std::ostringstream echo;
    echo << "polarppm simulate --code " << args.code << " --pav " << args.pav << " --nb "
         << format_double(nb) << " --lmax " << args.lmax << " --stop-errors "
         << args.stop_errors << " --max-frames " << args.max_frames << " --workers "
         << args.workers << (args.min_sum ? " --min-sum" : "") << " --seed " << seed;
    if (fresh) {
        write_results_header(results, echo.str());
        results.flush();
        hist << "# " << echo.str() << "\n";
        hist.flush();
    }

    SweepConfig config;
    config.p_av_db = grid;
    config.n_b = nb;
    config.run.L_max = args.lmax;
    config.run.stop_errors = args.stop_errors;
    config.run.max_frames = args.max_frames;
    config.run.workers = args.workers;
    config.run.decoder.min_sum = args.min_sum;
    config.master_seed = seed;

    auto already_done = [&](double p) {
        for (double d : done)
            if (std::abs(d - p) <= 1e-9)
                return true;
        return false;
    };
    run_sweep(code.spec, config, already_done, [&](const SimRecord& record) {
        append_result(results, record);
        results.flush();
        append_histogram(hist, record);
        hist.flush();
        std::cerr << "# P " << format_double(record.point.p_av_db) << ": frames "
                  << record.frames << ", CER " << format_double(record.cer()) << ", BER "
                  << format_double(record.ber())
                  << (record.reached_target ? "" : " (capped at max_frames)") << "\n";
    });
    if (!results || !hist)
        throw std::runtime_error("write to '" + args.out + "' failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"polar-coded PPM toolkit for the photon-counting Poisson channel"};
    app.require_subcommand(1);

    CapacityArgs cap_args;
    CLI::App* cap = app.add_subcommand(
        "capacity", "PPM capacity and BMD rate in bits per slot over a power sweep");
    cap->add_option("--M", cap_args.M, "PPM order, a power of two >= 2")->required();
    cap->add_option("--nb", cap_args.nb, "background photons per slot")->required();
    cap->add_option("--pav", cap_args.pav, "average power in dB: value or start:stop:step")
        ->required();
    cap->add_option("--samples", cap_args.samples, "Monte Carlo samples per point");
    cap->add_option("--seed", cap_args.seed, "random seed (drawn and logged when omitted)");
    cap->add_option("--out", cap_args.out, "output file (stdout when omitted)");

    MiArgs mi_args;
    CLI::App* mi = app.add_subcommand(
        "mi", "per-level demapper mutual informations at one power point");
    mi->add_option("--M", mi_args.M, "PPM order, a power of two >= 2")->required();
    mi->add_option("--nb", mi_args.nb, "background photons per slot")->required();
    mi->add_option("--pav", mi_args.pav, "average power in dB, a single value")->required();
    mi->add_option("--samples", mi_args.samples, "Monte Carlo samples");
    mi->add_option("--seed", mi_args.seed, "random seed (drawn and logged when omitted)");
    mi->add_option("--out", mi_args.out, "output file (stdout when omitted)");

    ConstructArgs con_args;
    CLI::App* con = app.add_subcommand("construct", "build a frozen-set code file");
    con->add_option("--M", con_args.M, "PPM order, a power of two >= 2")->required();
    con->add_option("--nb", con_args.nb, "background photons per slot")->required();
    con->add_option("--pav", con_args.pav, "design power in dB, a single value")->required();
    con->add_option("--n", con_args.n, "per-level transform length, a power of two")
        ->required();
    con->add_option("--shorten", con_args.shorten,
                    "trailing positions per level carrying known zeros");
    con->add_option("--rate", con_args.rate, "overall rate k_info/(m*(n-shorten))")
        ->required();
    con->add_option("--crc", con_args.crc, "outer CRC as hex:degree (Koopman), or 'none'");
    con->add_option("--method", con_args.method, "mc, mi-dga (alias ga), or mi-dbec (alias bec)");
    con->add_option("--samples", con_args.samples, "MI estimation samples (surrogate methods)");
    con->add_option("--trials", con_args.trials, "genie decoding trials (method mc)");
    con->add_option("--seed", con_args.seed, "random seed (drawn and logged when omitted)");
    con->add_option("--out", con_args.out, "code file path (stdout when omitted)");

    SimulateArgs sim_args;
    CLI::App* sim = app.add_subcommand("simulate", "frame-error campaign over a power sweep");
    sim->add_option("--code", sim_args.code, "code file produced by construct")->required();
    sim->add_option("--pav", sim_args.pav, "average power in dB: value or start:stop:step")
        ->required();
    sim->add_option("--nb", sim_args.nb, "background photons per slot (default: code file)");
    sim->add_option("--lmax", sim_args.lmax,
                    "list-size cap; the CRC ladder runs 32, 64, ... up to it");
    sim->add_option("--stop-errors", sim_args.stop_errors, "frame errors to collect per point");
    sim->add_option("--max-frames", sim_args.max_frames, "frame cap per point");
    sim->add_option("--workers", sim_args.workers, "parallel decoding threads");
    sim->add_flag("--min-sum", sim_args.min_sum, "min-sum check-node updates");
    sim->add_option("--seed", sim_args.seed, "random seed (drawn and logged when omitted)");
    sim->add_option("--out", sim_args.out, "results file; list histogram goes to <out>.hist")
        ->required();
    sim->add_flag("--resume", sim_args.resume, "append only the missing sweep points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(cap))
            return cmd_capacity(cap_args);
        if (app.got_subcommand(mi))
            return cmd_mi(mi_args);
        if (app.got_subcommand(con))
            return cmd_construct(con_args);
        if (app.got_subcommand(sim))
            return cmd_simulate(sim_args);
    } catch (const resource_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
