// dewedge: simulate, reconstruct, fit, refine, and evaluate limited-angle
// tomograms from the command line. Every command takes --config (JSON) plus
// targeted flag overrides. Exit codes: 0 success, 2 validation error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "dewedge/config.hpp"
#include "dewedge/fbp.hpp"
#include "dewedge/fft.hpp"
#include "dewedge/fit.hpp"
#include "dewedge/metrics.hpp"
#include "dewedge/mrc.hpp"
#include "dewedge/refine.hpp"
#include "dewedge/simulate.hpp"
#include "dewedge/subtomo.hpp"
#include "dewedge/theory.hpp"
#include "dewedge/wedge.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace dewedge;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
    bool workers_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON run configuration");
    cmd->add_option("--seed", opts.seed, "Override the config seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--workers", opts.workers, "Worker thread cap (1 = serial reference path)")
        ->each([&](const std::string&) { opts.workers_set = true; });
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = load_run_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.workers_set) cfg.workers = opts.workers;
    set_max_workers(cfg.workers > 0 ? cfg.workers : 0);
    if (cfg.workers <= 0) set_max_workers(0);
    return cfg;
}

std::int64_t fit_extract_cube(const RunConfig& cfg) {
    if (cfg.extract_cube > 0) return cfg.extract_cube;
    std::int64_t s = cfg.fit.cube_size;
    if (s <= 0) throw invalid_input("config: fit.cube_size or extract.cube_size must be set");
    return oversize_for_rotation(s, cfg.model.depth);
}

ordered_json metrics_report(const Volume& refined, const Volume& gt, double alpha_max,
                            const ParticleSet* particles, std::int64_t particle_cube) {
    const WedgeMask keep = wedge_mask(refined.dims, alpha_max);
    const FourierMask missing = complement(keep);

    ordered_json report;
    report["cc"] = cc(refined, gt);
    report["cc_outside_wedge"] = masked_cc(refined, gt, keep);
    FSCCurve curve = fsc_curve(refined, gt);
    report["fsc_resolution"] = fsc_resolution(curve, kFscThreshold, refined.voxel_size, refined.dims.d);
    FSCCurve curve_in = fsc_curve(refined, gt, &missing);
    report["fsc_resolution_in_wedge"] =
        fsc_resolution(curve_in, kFscThreshold, refined.voxel_size, refined.dims.d);
    if (particles) {
        ParticleSet usable = particles_in_bounds(*particles, refined.dims, particle_cube);
        if (!usable.particles.empty()) {
            report["particle_fsc_resolution"] = particle_fsc(refined, gt, usable, particle_cube);
            report["particle_count_evaluated"] = usable.particles.size();
        }
    }
    return report;
}

void write_report_files(const ordered_json& report, const std::string& json_path,
                        const std::string& csv_path) {
    std::ofstream jf(json_path);
    if (!jf) throw invalid_input("cannot open " + json_path);
    jf << report.dump(2) << "\n";
    std::ofstream cf(csv_path);
    if (!cf) throw invalid_input("cannot open " + csv_path);
    std::string header, row;
    for (auto it = report.begin(); it != report.end(); ++it) {
        if (!header.empty()) {
            header += ",";
            row += ",";
        }
        header += it.key();
        row += it.value().dump();
    }
    cf << header << "\n" << row << "\n";
}

int cmd_simulate(const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    auto [vol, particles] = make_phantom(cfg.phantom, cfg.seed);
    write_mrc(vol, cfg.out_dir + "/ground_truth.mrc");
    write_particles_json(particles, cfg.out_dir + "/particles.json");
    TiltSeries ts = simulate_tilt_series(vol, cfg.tilt, cfg.noise, cfg.seed);
    write_mrc(ts, cfg.out_dir + "/tilt_series.mrc", cfg.phantom.voxel_size);
    if (cfg.tilt.frames_per_tilt > 1)
        write_mrc_frame_stack(ts, cfg.out_dir + "/tilt_series_frames.mrc", cfg.phantom.voxel_size);
    save_run_config(cfg, cfg.out_dir + "/config.json");
    std::cout << "simulate: wrote " << ts.projections.size() << " projections to " << cfg.out_dir
              << "\n";
    return 0;
}

int cmd_split(const CommonOpts& opts, const std::string& input, const std::string& mode_str) {
    RunConfig cfg = resolve_config(opts);
    SplitMode mode = mode_str.empty() ? cfg.split_mode : split_mode_from_string(mode_str);
    TiltSeries ts = mode == SplitMode::frame_based
                        ? read_mrc_frame_stack(input, cfg.tilt.frames_per_tilt)
                        : read_mrc_tilt_series(input);
    auto [a, b] = split(ts, mode);
    fs::path in(input);
    const std::string stem = (in.parent_path() / in.stem()).string();
    write_mrc(a, stem + "_half0.mrc", cfg.phantom.voxel_size);
    write_mrc(b, stem + "_half1.mrc", cfg.phantom.voxel_size);
    std::cout << "split: " << a.projections.size() << " + " << b.projections.size()
              << " projections\n";
    return 0;
}

int cmd_fbp(const CommonOpts& opts, const std::string& input, const std::string& output,
            std::int64_t size, const std::string& filter_str) {
    RunConfig cfg = resolve_config(opts);
    FilterKind filter = filter_str.empty() ? cfg.fbp_filter : filter_kind_from_string(filter_str);
    TiltSeries ts = read_mrc_tilt_series(input);
    const std::int64_t n = size > 0 ? size : ts.projections.front().width;
    Volume vol = fbp(ts, filter, Dims3{n, ts.projections.front().height, n},
                     cfg.phantom.voxel_size);
    write_mrc(vol, output);
    std::cout << "fbp: wrote " << output << "\n";
    return 0;
}

int cmd_fit(const CommonOpts& opts, const std::string& half0, const std::string& half1) {
    RunConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    Volume r0 = read_mrc_volume(half0);
    Volume r1 = read_mrc_volume(half1);

    ExtractConfig ex;
    ex.cube_size = fit_extract_cube(cfg);
    ex.overlap = cfg.extract_overlap > 0 ? cfg.extract_overlap : ex.cube_size / 2;
    ex.min_content_fraction = cfg.min_content_fraction;
    if (cfg.use_content_mask) {
        Volume sum = r0;
        for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += r1.data[i];
        ex.content_mask = make_content_mask(sum, cfg.content_quantile);
    }
    std::vector<SubTomoPair> pairs = extract_pairs(r0, r1, ex);
    if (pairs.empty()) throw invalid_input("fit: extraction produced no sub-tomogram pairs");

    ModelConfig mc = cfg.model;
    mc.seed = cfg.seed;
    Model model = build_model(mc);
    FitConfig fc = cfg.fit;
    fc.seed = cfg.seed;
    if (fc.checkpoint_interval > 0) fc.checkpoint_dir = cfg.out_dir;
    std::cout << "fit: " << pairs.size() << " pairs, cube " << ex.cube_size << " -> "
              << (fc.cube_size > 0 ? fc.cube_size : 0) << ", " << fc.epochs << " epochs\n";
    FitResult result = fit(pairs, model, fc);

    save_model(result.model, cfg.out_dir + "/model.ckpt");
    write_loss_csv(cfg.out_dir + "/loss.csv", result.loss_history);
    write_fit_stats({result.stats, result.stats}, cfg.out_dir + "/stats.json");
    std::cout << "fit: final mean loss " << result.loss_history.back() << "\n";
    return 0;
}

int cmd_refine(const CommonOpts& opts, const std::string& model_path, const std::string& half0,
               const std::string& half1, const std::string& stats_path, const std::string& output) {
    RunConfig cfg = resolve_config(opts);
    Model model = load_model(model_path);
    Volume r0 = read_mrc_volume(half0);
    Volume r1 = read_mrc_volume(half1);
    FitStatsFile stats = read_fit_stats(stats_path);
    RefineConfig rc;
    rc.cube_size = cfg.refine_cube;
    rc.overlap = cfg.refine_overlap;
    rc.fit_stats = stats.fit_stats;
    rc.target_stats = stats.target_stats;
    Volume refined = refine(model, r0, r1, rc);
    write_mrc(refined, output);
    std::cout << "refine: wrote " << output << "\n";
    return 0;
}

int cmd_metrics(const CommonOpts& opts, const std::string& input, const std::string& reference,
                const std::string& particles_path, const std::string& out_prefix) {
    RunConfig cfg = resolve_config(opts);
    Volume refined = read_mrc_volume(input);
    Volume gt = read_mrc_volume(reference);
    if (refined.dims != gt.dims)
        throw invalid_input("metrics: input and reference shapes differ");
    ParticleSet particles;
    bool have_particles = !particles_path.empty();
    if (have_particles) particles = read_particles_json(particles_path);
    ordered_json report = metrics_report(refined, gt, cfg.metrics_alpha_max,
                                         have_particles ? &particles : nullptr, cfg.particle_cube);
    const std::string prefix = out_prefix.empty() ? "metrics_report" : out_prefix;
    write_report_files(report, prefix + ".json", prefix + ".csv");
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_verify(const CommonOpts& opts, const std::string& out_path, std::int64_t mask_trials,
               std::int64_t gap_trials, std::int64_t prop1_trials) {
    RunConfig cfg = resolve_config(opts);

    ordered_json report;
    {
        MaskIdentityReport r = verify_mask_identity(Dims3{16, 16, 16}, mask_trials, cfg.seed);
        report["mask_identity"] = {{"trials", r.trials}, {"violations", r.violations},
                                   {"pass", r.pass}};
    }
    {
        const Dims3 dims{8, 8, 8};
        std::mt19937_64 rng(mix_seed(cfg.seed, 0xce11));
        std::normal_distribution<double> gauss(0.0, 1.0);
        Volume x_star(dims, 1.0);
        for (auto& v : x_star.data) v = gauss(rng);
        const double sigma = 0.5;
        auto identity = [](const Volume& v) { return v; };
        auto smooth = [](const Volume& v) {
            Volume out = v;
            for (std::int64_t z = 0; z < v.dims.d; ++z)
                for (std::int64_t y = 0; y < v.dims.h; ++y)
                    for (std::int64_t x = 0; x < v.dims.w; ++x) {
                        double acc = v.at(z, y, x) * 2.0;
                        acc += v.at(z, y, (x + 1) % v.dims.w);
                        acc += v.at(z, y, (x + v.dims.w - 1) % v.dims.w);
                        out.at(z, y, x) = acc / 4.0;
                    }
            return out;
        };
        GapComparison gc = noise2noise_gap_pair(identity, smooth, x_star, sigma, gap_trials,
                                                cfg.seed);
        const double expected = sigma * sigma * static_cast<double>(dims.total());
        report["noise2noise_gap"] = {
            {"trials", gap_trials},
            {"gap_identity", gc.first.gap},
            {"se_identity", gc.first.std_error},
            {"gap_smooth", gc.second.gap},
            {"se_smooth", gc.second.std_error},
            {"map_difference", gc.diff},
            {"map_difference_se", gc.diff_se},
            {"expected_gap", expected},
            {"pass_expected",
             std::abs(gc.first.gap - expected) <= 3.0 * gc.first.std_error},
            {"pass_map_independence", std::abs(gc.diff) <= 3.0 * gc.diff_se}};
    }
    {
        const Dims3 dims{16, 16, 16};
        std::mt19937_64 rng(mix_seed(cfg.seed, 0xce12));
        std::normal_distribution<double> gauss(0.0, 1.0);
        Volume x_star(dims, 1.0);
        for (auto& v : x_star.data) v = gauss(rng);
        const WedgeMask a = wedge_mask(dims, 60.0);
        const WedgeMask b = wedge_mask(dims, 60.0, EulerAngles{0.0, std::acos(-1.0) / 2.0, 0.0});
        MaskPairDistribution dist = symmetric_pair(a, b);
        std::vector<Model> models;
        for (std::uint64_t s = 0; s < 2; ++s)
            models.push_back(build_model(ModelConfig{2, 1, 0.0, cfg.seed + s}));

        Prop1Report zero = prop1_check(models, dist, x_star, 0.3, 0.0, 16, cfg.seed);
        const double rel = std::abs(zero.models[0].gap) /
                           std::max(1e-300, std::abs(zero.models[0].loss));
        Prop1Report noisy = prop1_check(models, dist, x_star, 0.3, 0.3, prop1_trials, cfg.seed);
        report["prop1"] = {
            {"zero_noise_rel_gap", rel},
            {"zero_noise_pass", rel < 1e-5},
            {"trials", prop1_trials},
            {"gap_model0", noisy.models[0].gap},
            {"gap_model1", noisy.models[1].gap},
            {"model_difference", noisy.model_diff},
            {"model_difference_se", noisy.model_diff_se},
            {"noisy_pass", std::abs(noisy.model_diff) <= 3.0 * noisy.model_diff_se}};
    }

    bool all_pass = report["mask_identity"]["pass"].get<bool>() &&
                    report["noise2noise_gap"]["pass_expected"].get<bool>() &&
                    report["noise2noise_gap"]["pass_map_independence"].get<bool>() &&
                    report["prop1"]["zero_noise_pass"].get<bool>() &&
                    report["prop1"]["noisy_pass"].get<bool>();
    report["all_pass"] = all_pass;

    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw invalid_input("cannot open " + out_path);
        f << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    return all_pass ? 0 : 3;
}

int cmd_sweep(const CommonOpts& opts, const std::string& half0, const std::string& half1,
              const std::string& gt_path, std::vector<std::int64_t> sizes,
              const std::string& out_csv) {
    RunConfig cfg = resolve_config(opts);
    if (sizes.empty()) throw invalid_input("sweep-cubesize: no sizes given");
    Volume r0 = read_mrc_volume(half0);
    Volume r1 = read_mrc_volume(half1);
    Volume gt = read_mrc_volume(gt_path);

    // Constant total voxel budget across runs: the first size defines it.
    std::int64_t budget = 0;

    std::ofstream csv(out_csv.empty() ? "sweep_cubesize.csv" : out_csv);
    if (!csv) throw invalid_input("sweep-cubesize: cannot open output CSV");
    csv << "cube_size,pairs,cc,cc_outside_wedge,fsc_resolution,fsc_resolution_in_wedge,final_loss\n";

    for (std::int64_t s : sizes) {
        ExtractConfig ex;
        ex.cube_size = oversize_for_rotation(s, cfg.model.depth);
        ex.overlap = ex.cube_size / 2;
        std::vector<SubTomoPair> pairs = extract_pairs(r0, r1, ex);
        if (budget == 0 && !pairs.empty())
            budget = static_cast<std::int64_t>(pairs.size()) * s * s * s;
        std::int64_t want = std::max<std::int64_t>(1, budget / (s * s * s));
        if (static_cast<std::int64_t>(pairs.size()) > want) {
            // evenly spaced deterministic subsample
            std::vector<SubTomoPair> kept;
            for (std::int64_t i = 0; i < want; ++i)
                kept.push_back(pairs[static_cast<std::size_t>(
                    i * static_cast<std::int64_t>(pairs.size()) / want)]);
            pairs = std::move(kept);
        }

        ModelConfig mc = cfg.model;
        mc.seed = cfg.seed;
        FitConfig fc = cfg.fit;
        fc.seed = cfg.seed;
        fc.cube_size = s;
        FitResult result = fit(pairs, build_model(mc), fc);

        RefineConfig rc;
        rc.cube_size = s;
        rc.overlap = std::min<std::int64_t>(s / 2, cfg.refine_overlap);
        rc.fit_stats = result.stats;
        rc.target_stats = result.stats;
        Volume refined = refine(result.model, r0, r1, rc);

        ordered_json rep = metrics_report(refined, gt, cfg.metrics_alpha_max, nullptr,
                                          cfg.particle_cube);
        csv << s << "," << pairs.size() << "," << rep["cc"] << "," << rep["cc_outside_wedge"]
            << "," << rep["fsc_resolution"] << "," << rep["fsc_resolution_in_wedge"] << ","
            << result.loss_history.back() << "\n";
        csv.flush();
        std::cout << "sweep: cube " << s << " done (cc " << rep["cc"] << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised denoising and missing-wedge reconstruction for cryo-ET"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string input, output, mode_str, filter_str, half0, half1, model_path, stats_path;
    std::string reference, particles_path, out_prefix, gt_path, out_csv, report_path;
    std::int64_t size = 0;
    std::int64_t mask_trials = 1000, gap_trials = 10000, prop1_trials = 2000;
    std::vector<std::int64_t> sizes;

    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a phantom and its tilt series");
    add_common(simulate_cmd, opts);

    auto* split_cmd = app.add_subcommand("split", "Split a tilt series into two halves");
    add_common(split_cmd, opts);
    split_cmd->add_option("--input", input, "Tilt series MRC (frame stack for frame_based)")
        ->required();
    split_cmd->add_option("--mode", mode_str, "even_odd or frame_based");

    auto* fbp_cmd = app.add_subcommand("fbp", "Filtered back-projection reconstruction");
    add_common(fbp_cmd, opts);
    fbp_cmd->add_option("--input", input, "Tilt series MRC")->required();
    fbp_cmd->add_option("--output", output, "Output volume MRC")->required();
    fbp_cmd->add_option("--size", size, "Output depth/width (defaults to projection width)");
    fbp_cmd->add_option("--filter", filter_str, "ramp or hamming");

    auto* fit_cmd = app.add_subcommand("fit", "Fit the model on half-reconstruction pairs");
    add_common(fit_cmd, opts);
    fit_cmd->add_option("--half0", half0, "First half-reconstruction MRC")->required();
    fit_cmd->add_option("--half1", half1, "Second half-reconstruction MRC")->required();

    auto* refine_cmd = app.add_subcommand("refine", "Produce the final tomogram");
    add_common(refine_cmd, opts);
    refine_cmd->add_option("--model", model_path, "Model checkpoint")->required();
    refine_cmd->add_option("--half0", half0, "First half-reconstruction MRC")->required();
    refine_cmd->add_option("--half1", half1, "Second half-reconstruction MRC")->required();
    refine_cmd->add_option("--stats", stats_path, "stats.json from fit")->required();
    refine_cmd->add_option("--output", output, "Output volume MRC")->required();

    auto* metrics_cmd = app.add_subcommand("metrics", "Evaluate a reconstruction against ground truth");
    add_common(metrics_cmd, opts);
    metrics_cmd->add_option("--input", input, "Reconstruction MRC")->required();
    metrics_cmd->add_option("--reference", reference, "Ground-truth MRC")->required();
    metrics_cmd->add_option("--particles", particles_path, "particles.json for per-particle FSC");
    metrics_cmd->add_option("--out-prefix", out_prefix, "Report file prefix");

    auto* verify_cmd = app.add_subcommand("verify", "Run the estimator-identity checks");
    add_common(verify_cmd, opts);
    verify_cmd->add_option("--output", report_path, "Report JSON path");
    verify_cmd->add_option("--mask-trials", mask_trials, "Mask identity trials");
    verify_cmd->add_option("--gap-trials", gap_trials, "Noise2Noise gap trials");
    verify_cmd->add_option("--prop1-trials", prop1_trials, "Proposition-1 noise trials");

    auto* sweep_cmd = app.add_subcommand(
        "sweep-cubesize", "Fit across cube sizes at a constant total voxel budget");
    add_common(sweep_cmd, opts);
    sweep_cmd->add_option("--half0", half0, "First half-reconstruction MRC")->required();
    sweep_cmd->add_option("--half1", half1, "Second half-reconstruction MRC")->required();
    sweep_cmd->add_option("--reference", gt_path, "Ground-truth MRC")->required();
    sweep_cmd->add_option("--sizes", sizes, "Model-input cube sizes")->required();
    sweep_cmd->add_option("--output", out_csv, "Output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate_cmd->parsed()) return cmd_simulate(opts);
        if (split_cmd->parsed()) return cmd_split(opts, input, mode_str);
        if (fbp_cmd->parsed()) return cmd_fbp(opts, input, output, size, filter_str);
        if (fit_cmd->parsed()) return cmd_fit(opts, half0, half1);
        if (refine_cmd->parsed())
            return cmd_refine(opts, model_path, half0, half1, stats_path, output);
        if (metrics_cmd->parsed())
            return cmd_metrics(opts, input, reference, particles_path, out_prefix);
        if (verify_cmd->parsed())
            return cmd_verify(opts, report_path, mask_trials, gap_trials, prop1_trials);
        if (sweep_cmd->parsed()) return cmd_sweep(opts, half0, half1, gt_path, sizes, out_csv);
    } catch (const invalid_input& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const numeric_failure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
