#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "socc/errors.hpp"
#include "socc/pipeline.hpp"

namespace socc {

namespace {

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    const auto end = s.find_last_not_of(" \t\r");
    if (begin == std::string_view::npos) {
        return {};
    }
    return std::string(s.substr(begin, end - begin + 1));
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": '" + value + "'");
    }
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("invalid integer for " + key + ": '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

std::unordered_set<int> parse_class_set(const std::string& key, const std::string& value) {
    std::unordered_set<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.insert(parse_int(key, item));
        }
    }
    return out;
}

AnchorMode parse_anchor_mode(const std::string& value) {
    if (value == "first") return AnchorMode::kFirstInserted;
    if (value == "mean") return AnchorMode::kRunningMean;
    if (value == "center") return AnchorMode::kVoxelCenter;
    throw ConfigError("anchor_mode must be first, mean, or center (got '" + value + "')");
}

bool starts_with(const std::string& s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

void assign(PipelineConfig& cfg, const std::string& key, const std::string& value,
            const std::filesystem::path& base_dir) {
    if (key == "mapping.voxel_size") {
        cfg.mapping.voxel_size = parse_double(key, value);
    } else if (key == "mapping.ema_alpha") {
        cfg.mapping.ema_alpha = parse_double(key, value);
    } else if (key == "mapping.class_count") {
        cfg.mapping.class_count = parse_int(key, value);
    } else if (key == "mapping.p_hit") {
        cfg.mapping.p_hit = parse_double(key, value);
    } else if (key == "mapping.p_miss") {
        cfg.mapping.p_miss = parse_double(key, value);
    } else if (key == "mapping.p_miss_static") {
        cfg.mapping.p_miss_static = parse_double(key, value);
    } else if (key == "mapping.p_miss_moving") {
        cfg.mapping.p_miss_moving = parse_double(key, value);
    } else if (key == "mapping.static_classes") {
        cfg.mapping.static_classes = parse_class_set(key, value);
    } else if (key == "mapping.moving_classes") {
        cfg.mapping.moving_classes = parse_class_set(key, value);
    } else if (key == "mapping.log_odds_min") {
        cfg.mapping.log_odds_min = parse_double(key, value);
    } else if (key == "mapping.log_odds_max") {
        cfg.mapping.log_odds_max = parse_double(key, value);
    } else if (key == "mapping.max_range") {
        cfg.mapping.max_range = parse_double(key, value);
    } else if (starts_with(key, "mapping.p_hit_class_")) {
        const int c = parse_int(key, key.substr(std::string_view("mapping.p_hit_class_").size()));
        cfg.mapping.p_hit_class[c] = parse_double(key, value);
    } else if (starts_with(key, "mapping.p_miss_class_")) {
        const int c = parse_int(key, key.substr(std::string_view("mapping.p_miss_class_").size()));
        cfg.mapping.p_miss_class[c] = parse_double(key, value);
    } else if (key == "downsample.base_multiplier") {
        cfg.downsample.base_multiplier = parse_double(key, value);
    } else if (key == "downsample.class_factors_file") {
        const std::filesystem::path p = base_dir.empty() ? std::filesystem::path(value)
                                                         : base_dir / value;
        cfg.downsample.class_factors = load_class_factors(p, cfg.mapping.class_count);
    } else if (key == "registration.tau_planar") {
        cfg.registration.tau_planar = parse_double(key, value);
    } else if (key == "registration.min_points_for_plane") {
        cfg.registration.min_points_for_plane = parse_int(key, value);
    } else if (key == "registration.gamma") {
        cfg.registration.gamma = parse_double(key, value);
    } else if (key == "registration.w_lower") {
        cfg.registration.w_lower = parse_double(key, value);
    } else if (key == "registration.gm_scale") {
        cfg.registration.gm_scale = parse_double(key, value);
    } else if (key == "registration.max_iterations") {
        cfg.registration.max_iterations = parse_int(key, value);
    } else if (key == "registration.convergence_eps") {
        cfg.registration.convergence_eps = parse_double(key, value);
    } else if (key == "registration.mix_per_iteration") {
        cfg.registration.mix_per_iteration = parse_bool(key, value);
    } else if (key == "threshold.tau_min") {
        cfg.threshold.tau_min = parse_double(key, value);
    } else if (key == "threshold.sigma_multiplier") {
        cfg.threshold.sigma_multiplier = parse_double(key, value);
    } else if (key == "ablations.use_cleaning_ray") {
        cfg.ablations.use_cleaning_ray = parse_bool(key, value);
    } else if (key == "ablations.use_occ_weight") {
        cfg.ablations.use_occ_weight = parse_bool(key, value);
    } else if (key == "ablations.use_sem_weight") {
        cfg.ablations.use_sem_weight = parse_bool(key, value);
    } else if (key == "ablations.use_semantic_downsample") {
        cfg.ablations.use_semantic_downsample = parse_bool(key, value);
    } else if (key == "ablations.anchor_mode") {
        cfg.ablations.anchor_mode = parse_anchor_mode(value);
    } else {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
}

}  // namespace

PipelineConfig load_pipeline_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open config file " + file.string());
    }
    PipelineConfig cfg;
    const std::filesystem::path base_dir = file.parent_path();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string stripped = trim(line);
        if (stripped.empty()) {
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(file.string() + ":" + std::to_string(line_no) +
                              ": expected key = value");
        }
        assign(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)), base_dir);
    }
    cfg.validate();
    return cfg;
}

void apply_config_override(PipelineConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override must look like key=value: '" + assignment + "'");
    }
    std::string key = trim(assignment.substr(0, eq));
    // Bare ablation names are accepted as a shorthand.
    if (key.find('.') == std::string::npos) {
        key = "ablations." + key;
    }
    assign(cfg, key, trim(assignment.substr(eq + 1)), {});
    cfg.validate();
}

std::vector<double> load_class_factors(const std::filesystem::path& file, int class_count) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open class factor file " + file.string());
    }
    std::vector<double> factors(static_cast<std::size_t>(class_count), 1.0);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string stripped = trim(line);
        if (stripped.empty()) {
            continue;
        }
        std::istringstream ss(stripped);
        int class_id = 0;
        double factor = 0.0;
        if (!(ss >> class_id >> factor) || class_id < 0 || factor < 0.0) {
            throw MalformedFile(file.string() + ":" + std::to_string(line_no) +
                                ": expected 'class_id factor name'");
        }
        if (class_id < class_count) {
            factors[class_id] = factor;
        }
    }
    return factors;
}

}  // namespace socc
