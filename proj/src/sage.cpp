#include "ivhedge/sage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"
#include "ivhedge/parallel.hpp"
#include "ivhedge/rng.hpp"

namespace ivhedge {

using nlohmann::json;

std::string sage_mode_name(SageMode m) {
    return m == SageMode::Exact ? "exact" : "sampled";
}

SageMode sage_mode_from_name(const std::string& name) {
    if (name == "exact") {
        return SageMode::Exact;
    }
    if (name == "sampled") {
        return SageMode::Sampled;
    }
    throw ConfigError("unknown SAGE mode '" + name + "' (expected exact or sampled)");
}

namespace {

std::vector<std::vector<int>> draw_permutations(int n, int count, std::uint64_t seed) {
    std::vector<std::vector<int>> perms;
    RngStream rng(seed, 0x7065726d73ULL);
    for (int p = 0; p < count; ++p) {
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            const int j = std::min(i, static_cast<int>(rng.uniform() * (i + 1)));
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
        }
        perms.push_back(std::move(perm));
    }
    return perms;
}

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) {
        f *= i;
    }
    return f;
}

}  // namespace

SageReport shapley_from_risk(const std::vector<std::string>& features, const SubsetRisk& risk, SageMode mode,
                             int permutations, std::uint64_t seed,
                             const std::function<void(const std::vector<std::uint32_t>&)>& evaluate_batch) {
    const int n = static_cast<int>(features.size());
    if (n < 1 || n > 16) {
        throw ConfigError("SAGE needs between 1 and 16 attributed features");
    }
    if (mode == SageMode::Sampled && permutations < 1) {
        throw ConfigError("SAGE sampled mode needs at least one permutation");
    }
    const std::uint32_t full = (1u << n) - 1u;
    std::vector<std::vector<int>> perms;
    std::set<std::uint32_t> needed;
    if (mode == SageMode::Exact) {
        for (std::uint32_t m = 0; m <= full; ++m) {
            needed.insert(m);
        }
    } else {
        perms = draw_permutations(n, permutations, seed);
        needed.insert(0u);
        for (const auto& perm : perms) {
            std::uint32_t m = 0;
            for (int j : perm) {
                m |= 1u << j;
                needed.insert(m);
            }
        }
    }
    if (evaluate_batch) {
        evaluate_batch(std::vector<std::uint32_t>(needed.begin(), needed.end()));
    }

    SageReport rep;
    rep.features = features;
    rep.mode = mode;
    rep.permutations = mode == SageMode::Sampled ? permutations : 0;
    for (std::uint32_t m : needed) {
        rep.subset_risk[m] = risk(m);
    }
    const auto& rho = rep.subset_risk;
    rep.contributions.assign(static_cast<std::size_t>(n), 0.0);
    if (mode == SageMode::Exact) {
        const double n_fact = factorial(n);
        for (int j = 0; j < n; ++j) {
            const std::uint32_t bit = 1u << j;
            double c = 0.0;
            for (std::uint32_t m = 0; m <= full; ++m) {
                if ((m & bit) != 0u) {
                    continue;
                }
                const int size = std::popcount(m);
                const double w = factorial(size) * factorial(n - 1 - size) / n_fact;
                c += w * (rho.at(m) - rho.at(m | bit));
            }
            rep.contributions[static_cast<std::size_t>(j)] = c;
        }
    } else {
        for (const auto& perm : perms) {
            std::uint32_t m = 0;
            for (int j : perm) {
                const std::uint32_t next = m | (1u << j);
                rep.contributions[static_cast<std::size_t>(j)] += rho.at(m) - rho.at(next);
                m = next;
            }
        }
        for (double& c : rep.contributions) {
            c /= static_cast<double>(permutations);
        }
    }
    rep.risk_baseline = rho.at(0u);
    rep.risk_full = rho.at(full);
    const double total = rep.total_reduction();
    for (double c : rep.contributions) {
        rep.relative.push_back(total != 0.0 ? c / total : 0.0);
    }
    return rep;
}

std::uint64_t subset_seed(std::uint64_t master, std::uint32_t mask) {
    return mix64(mix64(master ^ 0x73616765ULL) + static_cast<std::uint64_t>(mask));
}

std::vector<Feature> subset_features(const SageConfig& cfg, std::uint32_t mask) {
    std::vector<Feature> out = cfg.baseline;
    for (std::size_t j = 0; j < cfg.universe.size(); ++j) {
        if ((mask >> j) & 1u) {
            out.push_back(cfg.universe[j]);
        }
    }
    return out;
}

SageReport sage(const SageConfig& cfg, const HedgeConfig& hedge, const PathSet& train_paths,
                const PathSet& test_paths) {
    if (cfg.universe.empty() || cfg.universe.size() > 16) {
        throw ConfigError("sage: the attributed universe must hold 1 to 16 features");
    }
    for (Feature f : cfg.universe) {
        if (std::find(cfg.baseline.begin(), cfg.baseline.end(), f) != cfg.baseline.end()) {
            throw ConfigError("sage: feature " + feature_name(f) + " is both baseline and attributed");
        }
        if (std::count(cfg.universe.begin(), cfg.universe.end(), f) > 1) {
            throw ConfigError("sage: feature " + feature_name(f) + " appears twice in the universe");
        }
    }
    if (cfg.baseline.empty()) {
        throw ConfigError("sage: the baseline feature set must not be empty");
    }
    {
        HedgeConfig probe = hedge;
        probe.features = cfg.baseline;
        probe.validate();
    }
    std::vector<std::string> names;
    for (Feature f : cfg.universe) {
        names.push_back(feature_name(f));
    }

    std::map<std::uint32_t, double> cache;
    auto run_subset = [&](std::uint32_t mask) {
        HedgeConfig h = hedge;
        h.features = subset_features(cfg, mask);
        TrainConfig t = cfg.train;
        t.seed = subset_seed(cfg.seed, mask);
        t.on_epoch = nullptr;
        const TrainResult tr = train(t, h, train_paths);
        RunOptions opt;
        opt.chunk = t.chunk;
        opt.threads = resolve_threads(t.threads);
        const HedgeResult res = run_hedge(test_paths, NeuralStrategy(tr.policy), h, opt);
        return penalty_estimate(res.xi, h.penalty);
    };
    auto batch = [&](const std::vector<std::uint32_t>& masks) {
        std::vector<double> risks(masks.size());
        parallel_for(static_cast<std::ptrdiff_t>(masks.size()), std::max(1, cfg.subset_threads),
                     [&](std::ptrdiff_t b, std::ptrdiff_t e) {
                         for (std::ptrdiff_t i = b; i < e; ++i) {
                             risks[static_cast<std::size_t>(i)] = run_subset(masks[static_cast<std::size_t>(i)]);
                         }
                     });
        for (std::size_t i = 0; i < masks.size(); ++i) {
            cache[masks[i]] = risks[i];
        }
    };
    auto risk = [&](std::uint32_t mask) {
        auto it = cache.find(mask);
        if (it == cache.end()) {
            it = cache.emplace(mask, run_subset(mask)).first;
        }
        return it->second;
    };
    SageReport rep = shapley_from_risk(names, risk, cfg.mode, cfg.permutations, cfg.seed, batch);
    rep.penalty = hedge.penalty.name();
    return rep;
}

void write_sage_csv(const SageReport& report, const std::filesystem::path& file,
                    const std::filesystem::path& subsets_file) {
    std::ostringstream out;
    out << "feature,contribution,relative\n";
    for (std::size_t j = 0; j < report.features.size(); ++j) {
        out << report.features[j] << ',' << format_double(report.contributions[j]) << ','
            << format_double(report.relative[j]) << '\n';
    }
    write_text_file(file, out.str());
    if (!subsets_file.empty()) {
        std::ostringstream sub;
        sub << "mask,features,risk\n";
        for (const auto& [mask, rho] : report.subset_risk) {
            std::string label;
            for (std::size_t j = 0; j < report.features.size(); ++j) {
                if ((mask >> j) & 1u) {
                    label += (label.empty() ? "" : "+") + report.features[j];
                }
            }
            sub << mask << ',' << (label.empty() ? "baseline" : label) << ',' << format_double(rho) << '\n';
        }
        write_text_file(subsets_file, sub.str());
    }
}

std::string sage_report_to_json(const SageReport& report) {
    json j;
    j["format"] = "ivhedge-sage";
    j["version"] = 1;
    j["mode"] = sage_mode_name(report.mode);
    j["permutations"] = report.permutations;
    j["penalty"] = report.penalty;
    j["features"] = report.features;
    j["contributions"] = report.contributions;
    j["relative"] = report.relative;
    j["risk_baseline"] = report.risk_baseline;
    j["risk_full"] = report.risk_full;
    j["total_reduction"] = report.total_reduction();
    json subsets = json::array();
    for (const auto& [mask, rho] : report.subset_risk) {
        subsets.push_back({{"mask", mask}, {"risk", rho}});
    }
    j["subsets"] = subsets;
    return j.dump(2) + "\n";
}

SageReport sage_report_from_json(const std::string& text) {
    SageReport r;
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "ivhedge-sage") {
            throw ConfigError("not a SAGE report");
        }
        r.mode = sage_mode_from_name(j.at("mode").get<std::string>());
        r.permutations = j.at("permutations").get<int>();
        r.penalty = j.at("penalty").get<std::string>();
        r.features = j.at("features").get<std::vector<std::string>>();
        r.contributions = j.at("contributions").get<std::vector<double>>();
        r.relative = j.at("relative").get<std::vector<double>>();
        r.risk_baseline = j.at("risk_baseline").get<double>();
        r.risk_full = j.at("risk_full").get<double>();
        for (const auto& s : j.at("subsets")) {
            r.subset_risk[s.at("mask").get<std::uint32_t>()] = s.at("risk").get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed SAGE report: ") + e.what());
    }
    if (r.contributions.size() != r.features.size() || r.relative.size() != r.features.size()) {
        throw ConfigError("malformed SAGE report: contribution count does not match the features");
    }
    return r;
}

}  // namespace ivhedge
