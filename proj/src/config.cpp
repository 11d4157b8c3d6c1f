#include "dewedge/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dewedge {

using ordered_json = nlohmann::ordered_json;

namespace {

template <typename T>
void maybe(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw invalid_input("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw invalid_input("cannot open " + path + " for writing");
    f << text;
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["out_dir"] = cfg.out_dir;

    ordered_json ph;
    ph["shape"] = cfg.phantom.shape.d;
    ph["voxel_size"] = cfg.phantom.voxel_size;
    ph["particle_count"] = cfg.phantom.particle_count;
    std::vector<std::string> kinds;
    for (auto k : cfg.phantom.particle_kinds) kinds.push_back(to_string(k));
    ph["particle_kinds"] = kinds;
    ph["min_size"] = cfg.phantom.min_size;
    ph["max_size"] = cfg.phantom.max_size;
    ph["membrane_count"] = cfg.phantom.membrane_count;
    ph["fiducial_count"] = cfg.phantom.fiducial_count;
    ph["min_density"] = cfg.phantom.min_density;
    ph["max_density"] = cfg.phantom.max_density;
    j["phantom"] = ph;

    ordered_json tilt;
    tilt["min_angle"] = cfg.tilt.min_angle_deg;
    tilt["max_angle"] = cfg.tilt.max_angle_deg;
    tilt["increment"] = cfg.tilt.increment_deg;
    tilt["frames_per_tilt"] = cfg.tilt.frames_per_tilt;
    j["tilt"] = tilt;

    j["noise"] = {{"target_snr", cfg.noise.target_snr}};
    j["split"] = {{"mode", to_string(cfg.split_mode)}};
    j["fbp"] = {{"filter", to_string(cfg.fbp_filter)}};

    ordered_json ex;
    ex["cube_size"] = cfg.extract_cube;
    ex["overlap"] = cfg.extract_overlap;
    ex["min_content_fraction"] = cfg.min_content_fraction;
    ex["use_content_mask"] = cfg.use_content_mask;
    ex["content_quantile"] = cfg.content_quantile;
    j["extract"] = ex;

    ordered_json mo;
    mo["base_channels"] = cfg.model.base_channels;
    mo["depth"] = cfg.model.depth;
    mo["dropout_p"] = cfg.model.dropout_p;
    j["model"] = mo;

    ordered_json fi;
    fi["epochs"] = cfg.fit.epochs;
    fi["learning_rate"] = cfg.fit.learning_rate;
    fi["batch_size"] = cfg.fit.batch_size;
    fi["alpha_max"] = cfg.fit.wedge_alpha_max_deg;
    fi["mode"] = to_string(cfg.fit.mode);
    fi["update_input_wedges"] = cfg.fit.update_input_wedges;
    fi["cube_size"] = cfg.fit.cube_size;
    fi["checkpoint_interval"] = cfg.fit.checkpoint_interval;
    fi["adam_beta1"] = cfg.fit.adam_beta1;
    fi["adam_beta2"] = cfg.fit.adam_beta2;
    fi["adam_epsilon"] = cfg.fit.adam_epsilon;
    j["fit"] = fi;

    ordered_json re;
    re["cube_size"] = cfg.refine_cube;
    re["overlap"] = cfg.refine_overlap;
    j["refine"] = re;

    ordered_json me;
    me["alpha_max"] = cfg.metrics_alpha_max;
    me["particle_cube"] = cfg.particle_cube;
    j["metrics"] = me;
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw invalid_input(std::string("config parse error: ") + e.what());
    }
    RunConfig cfg;
    maybe(j, "seed", cfg.seed);
    maybe(j, "workers", cfg.workers);
    maybe(j, "out_dir", cfg.out_dir);

    if (j.contains("phantom")) {
        const auto& ph = j.at("phantom");
        if (ph.contains("shape")) {
            std::int64_t n = ph.at("shape").get<std::int64_t>();
            cfg.phantom.shape = Dims3{n, n, n};
        }
        maybe(ph, "voxel_size", cfg.phantom.voxel_size);
        maybe(ph, "particle_count", cfg.phantom.particle_count);
        if (ph.contains("particle_kinds")) {
            cfg.phantom.particle_kinds.clear();
            for (const auto& k : ph.at("particle_kinds"))
                cfg.phantom.particle_kinds.insert(particle_kind_from_string(k.get<std::string>()));
        }
        maybe(ph, "min_size", cfg.phantom.min_size);
        maybe(ph, "max_size", cfg.phantom.max_size);
        maybe(ph, "membrane_count", cfg.phantom.membrane_count);
        maybe(ph, "fiducial_count", cfg.phantom.fiducial_count);
        maybe(ph, "min_density", cfg.phantom.min_density);
        maybe(ph, "max_density", cfg.phantom.max_density);
    }
    if (j.contains("tilt")) {
        const auto& t = j.at("tilt");
        maybe(t, "min_angle", cfg.tilt.min_angle_deg);
        maybe(t, "max_angle", cfg.tilt.max_angle_deg);
        maybe(t, "increment", cfg.tilt.increment_deg);
        maybe(t, "frames_per_tilt", cfg.tilt.frames_per_tilt);
    }
    if (j.contains("noise")) maybe(j.at("noise"), "target_snr", cfg.noise.target_snr);
    if (j.contains("split") && j.at("split").contains("mode"))
        cfg.split_mode = split_mode_from_string(j.at("split").at("mode").get<std::string>());
    if (j.contains("fbp") && j.at("fbp").contains("filter"))
        cfg.fbp_filter = filter_kind_from_string(j.at("fbp").at("filter").get<std::string>());
    if (j.contains("extract")) {
        const auto& ex = j.at("extract");
        maybe(ex, "cube_size", cfg.extract_cube);
        maybe(ex, "overlap", cfg.extract_overlap);
        maybe(ex, "min_content_fraction", cfg.min_content_fraction);
        maybe(ex, "use_content_mask", cfg.use_content_mask);
        maybe(ex, "content_quantile", cfg.content_quantile);
    }
    if (j.contains("model")) {
        const auto& mo = j.at("model");
        maybe(mo, "base_channels", cfg.model.base_channels);
        maybe(mo, "depth", cfg.model.depth);
        maybe(mo, "dropout_p", cfg.model.dropout_p);
    }
    if (j.contains("fit")) {
        const auto& fi = j.at("fit");
        maybe(fi, "epochs", cfg.fit.epochs);
        maybe(fi, "learning_rate", cfg.fit.learning_rate);
        maybe(fi, "batch_size", cfg.fit.batch_size);
        maybe(fi, "alpha_max", cfg.fit.wedge_alpha_max_deg);
        if (fi.contains("mode")) cfg.fit.mode = fit_mode_from_string(fi.at("mode").get<std::string>());
        maybe(fi, "update_input_wedges", cfg.fit.update_input_wedges);
        maybe(fi, "cube_size", cfg.fit.cube_size);
        maybe(fi, "checkpoint_interval", cfg.fit.checkpoint_interval);
        maybe(fi, "adam_beta1", cfg.fit.adam_beta1);
        maybe(fi, "adam_beta2", cfg.fit.adam_beta2);
        maybe(fi, "adam_epsilon", cfg.fit.adam_epsilon);
    }
    if (j.contains("refine")) {
        const auto& re = j.at("refine");
        maybe(re, "cube_size", cfg.refine_cube);
        maybe(re, "overlap", cfg.refine_overlap);
    }
    if (j.contains("metrics")) {
        const auto& me = j.at("metrics");
        maybe(me, "alpha_max", cfg.metrics_alpha_max);
        maybe(me, "particle_cube", cfg.particle_cube);
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(read_text_file(path));
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    write_text_file(path, run_config_to_json(cfg) + "\n");
}

void write_particles_json(const ParticleSet& set, const std::string& path) {
    ordered_json j;
    ordered_json list = ordered_json::array();
    for (const auto& p : set.particles) {
        ordered_json e;
        e["center"] = {p.center[0], p.center[1], p.center[2]};
        e["extent"] = p.extent;
        e["kind"] = to_string(p.kind);
        list.push_back(e);
    }
    j["particles"] = list;
    write_text_file(path, j.dump(2) + "\n");
}

ParticleSet read_particles_json(const std::string& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(path));
    } catch (const std::exception& e) {
        throw invalid_input(std::string("particles parse error: ") + e.what());
    }
    ParticleSet set;
    for (const auto& e : j.at("particles")) {
        Particle p;
        p.center = {e.at("center")[0].get<double>(), e.at("center")[1].get<double>(),
                    e.at("center")[2].get<double>()};
        p.extent = e.at("extent").get<double>();
        p.kind = particle_kind_from_string(e.at("kind").get<std::string>());
        set.particles.push_back(p);
    }
    return set;
}

void write_fit_stats(const FitStatsFile& stats, const std::string& path) {
    ordered_json j;
    j["mu"] = stats.fit_stats.mu;
    j["sigma"] = stats.fit_stats.sigma;
    j["mu_t"] = stats.target_stats.mu;
    j["sigma_t"] = stats.target_stats.sigma;
    write_text_file(path, j.dump(2) + "\n");
}

FitStatsFile read_fit_stats(const std::string& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(path));
    } catch (const std::exception& e) {
        throw invalid_input(std::string("stats parse error: ") + e.what());
    }
    FitStatsFile out;
    out.fit_stats.mu = j.at("mu").get<double>();
    out.fit_stats.sigma = j.at("sigma").get<double>();
    out.target_stats.mu = j.at("mu_t").get<double>();
    out.target_stats.sigma = j.at("sigma_t").get<double>();
    return out;
}

}  // namespace dewedge
