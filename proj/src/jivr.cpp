#include "ivhedge/jivr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/LU>
#include <json.hpp>

#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"
#include "ivhedge/manifest.hpp"
#include "ivhedge/parallel.hpp"

namespace ivhedge {

using nlohmann::json;

namespace {

constexpr const char* kParamsFormat = "ivhedge-jivr-params";
constexpr double kAnchorTau = 1.0 / 12.0;

double get_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw ConfigError(where + "." + key + ": missing or not a number");
    }
    const double v = j.at(key).get<double>();
    if (!std::isfinite(v)) {
        throw ConfigError(where + "." + key + ": not finite");
    }
    return v;
}

const json& get_object(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw ConfigError(where + "." + key + ": missing");
    }
    return j.at(key);
}

void check_unit_interval(double v, const std::string& name) {
    if (!(v > 0.0 && v < 1.0)) {
        throw ConfigError(name + " must lie in (0, 1), got " + format_double(v));
    }
}

}  // namespace

double JivrParams::sigma(int i) const {
    const double table = beta[static_cast<std::size_t>(i)].sigma_table;
    return sigma_units == SigmaUnits::Annualized ? table : table / std::sqrt(252.0);
}

Eigen::Matrix<double, 5, 5> JivrParams::theta() const {
    Eigen::Matrix<double, 5, 5> m;
    for (int i = 0; i < 5; ++i) {
        m.row(i) = beta[static_cast<std::size_t>(i)].theta;
    }
    return m;
}

Vector5<double> JivrParams::alpha() const {
    Vector5<double> a;
    for (int i = 0; i < 5; ++i) {
        a(i) = beta[static_cast<std::size_t>(i)].alpha;
    }
    return a;
}

void JivrParams::validate() const {
    check_unit_interval(ret.kappa, "return.kappa");
    if (!(ret.a >= 0.0)) {
        throw ConfigError("return.a must be non-negative");
    }
    if (!(ret.omega > 0.0)) {
        throw ConfigError("return.omega must be positive");
    }
    if (!(ret.nig.phi > 0.0)) {
        throw ConfigError("return.phi must be positive");
    }
    if (!(omega1 > 0.0)) {
        throw ConfigError("omega1 must be positive");
    }
    for (int i = 0; i < 5; ++i) {
        const auto& b = beta[static_cast<std::size_t>(i)];
        const std::string name = "beta[" + std::to_string(i + 1) + "]";
        check_unit_interval(b.kappa, name + ".kappa");
        if (!(b.a >= 0.0)) {
            throw ConfigError(name + ".a must be non-negative");
        }
        if (!(b.nig.phi > 0.0)) {
            throw ConfigError(name + ".phi must be positive");
        }
        if (i > 0 && !(b.sigma_table > 0.0)) {
            throw ConfigError(name + ".sigma_sqrt252 must be positive");
        }
        if (!b.theta.allFinite() || !std::isfinite(b.alpha) || !std::isfinite(b.gamma)) {
            throw ConfigError(name + " has non-finite coefficients");
        }
    }
    if (!std::isfinite(lambda) || !std::isfinite(nu) || !std::isfinite(r) || !std::isfinite(q)) {
        throw ConfigError("lambda, nu, r and q must be finite");
    }
    if (!(delta_t > 0.0)) {
        throw ConfigError("delta_t must be positive");
    }
}

JivrParams jivr_params_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("parameter file is not valid JSON: ") + e.what());
    }
    if (j.value("format", std::string()) != kParamsFormat) {
        throw ConfigError(std::string("parameter file: 'format' must be \"") + kParamsFormat + "\"");
    }
    JivrParams p;
    p.version = j.value("version", 0);
    if (p.version != 1) {
        throw ConfigError("parameter file: unsupported version " + std::to_string(p.version));
    }
    const json& rates = get_object(j, "rates", "params");
    p.r = get_number(rates, "r", "rates");
    p.q = get_number(rates, "q", "rates");
    p.delta_t = 1.0 / get_number(rates, "days_per_year", "rates");

    const json& ret = get_object(j, "return", "params");
    p.lambda = get_number(ret, "lambda", "return");
    p.ret.kappa = get_number(ret, "kappa", "return");
    p.ret.a = get_number(ret, "a", "return");
    p.ret.gamma = get_number(ret, "gamma", "return");
    p.ret.omega = get_number(ret, "omega", "return");
    p.ret.nig = {get_number(ret, "zeta", "return"), get_number(ret, "phi", "return")};

    p.omega1 = get_number(j, "omega1", "params");
    p.nu = get_number(j, "nu", "params");
    const std::string units = j.value("sigma_units", std::string("annualized"));
    if (units == "annualized") {
        p.sigma_units = SigmaUnits::Annualized;
    } else if (units == "per_period") {
        p.sigma_units = SigmaUnits::PerPeriod;
    } else {
        throw ConfigError("sigma_units must be \"annualized\" or \"per_period\"");
    }

    const json& betas = get_object(j, "beta", "params");
    if (!betas.is_array() || betas.size() != 5) {
        throw ConfigError("params.beta must be an array of 5 blocks");
    }
    for (std::size_t i = 0; i < 5; ++i) {
        const json& b = betas[i];
        const std::string where = "beta[" + std::to_string(i + 1) + "]";
        auto& out = p.beta[i];
        out.alpha = get_number(b, "alpha", where);
        const json& th = get_object(b, "theta", where);
        if (!th.is_array() || th.size() != 5) {
            throw ConfigError(where + ".theta must have 5 entries");
        }
        for (std::size_t k = 0; k < 5; ++k) {
            out.theta(static_cast<Eigen::Index>(k)) = th[k].is_null() ? 0.0 : th[k].get<double>();
        }
        out.sigma_table = b.contains("sigma_sqrt252") && !b.at("sigma_sqrt252").is_null()
                              ? get_number(b, "sigma_sqrt252", where)
                              : 0.0;
        out.kappa = get_number(b, "kappa", where);
        out.a = get_number(b, "a", where);
        out.gamma = get_number(b, "gamma", where);
        out.nig = {get_number(b, "zeta", where), get_number(b, "phi", where)};
    }

    const json& cop = get_object(j, "copula", "params");
    const json& corr = get_object(cop, "corr", "copula");
    if (!corr.is_array() || corr.size() != 6) {
        throw ConfigError("copula.corr must be a 6x6 array");
    }
    Matrix6 c;
    for (int r = 0; r < 6; ++r) {
        const json& row = corr[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.size() != 6) {
            throw ConfigError("copula.corr must be a 6x6 array");
        }
        for (int k = 0; k < 6; ++k) {
            c(r, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
    }
    p.copula = CopulaSpec(c);
    p.validate();
    return p;
}

std::string jivr_params_to_json_text(const JivrParams& p) {
    json j;
    j["format"] = kParamsFormat;
    j["version"] = p.version;
    j["rates"] = {{"r", p.r}, {"q", p.q}, {"days_per_year", 1.0 / p.delta_t}};
    j["return"] = {{"lambda", p.lambda}, {"kappa", p.ret.kappa}, {"a", p.ret.a},
                   {"gamma", p.ret.gamma}, {"omega", p.ret.omega}, {"zeta", p.ret.nig.zeta},
                   {"phi", p.ret.nig.phi}};
    j["omega1"] = p.omega1;
    j["nu"] = p.nu;
    j["sigma_units"] = p.sigma_units == SigmaUnits::Annualized ? "annualized" : "per_period";
    json betas = json::array();
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& b = p.beta[i];
        json theta = json::array();
        for (int k = 0; k < 5; ++k) {
            theta.push_back(b.theta(k));
        }
        json out = {{"alpha", b.alpha}, {"theta", theta}, {"kappa", b.kappa}, {"a", b.a},
                    {"gamma", b.gamma}, {"zeta", b.nig.zeta}, {"phi", b.nig.phi}};
        out["sigma_sqrt252"] = i == 0 ? json(nullptr) : json(b.sigma_table);
        betas.push_back(out);
    }
    j["beta"] = betas;
    json corr = json::array();
    for (int r = 0; r < 6; ++r) {
        json row = json::array();
        for (int k = 0; k < 6; ++k) {
            row.push_back(p.copula.corr()(r, k));
        }
        corr.push_back(row);
    }
    j["copula"] = {{"order", {"eps_R", "eps_1", "eps_2", "eps_3", "eps_4", "eps_5"}}, {"corr", corr}};
    return j.dump(2) + "\n";
}

JivrParams load_jivr_params(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) {
        throw ConfigError("parameter file not found: '" + file.string() + "'");
    }
    try {
        return jivr_params_from_json_text(read_text_file(file));
    } catch (const ConfigError& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

void MarketState::validate() const {
    if (!(S > 0.0) || !std::isfinite(S)) {
        throw NumericalError("market state: S must be positive and finite");
    }
    if (!beta.allFinite() || !std::isfinite(beta2_lag)) {
        throw NumericalError("market state: surface coefficients must be finite");
    }
    if (!(h_R > 0.0) || !std::isfinite(h_R)) {
        throw NumericalError("market state: h_R must be positive and finite");
    }
    for (int i = 0; i < 5; ++i) {
        if (!(h(i) > 0.0) || !std::isfinite(h(i))) {
            throw NumericalError("market state: h_" + std::to_string(i + 1) +
                                 " must be positive and finite");
        }
    }
}

JivrModel::JivrModel(JivrParams p) : params_(std::move(p)) {
    params_.validate();
    marginals_.reserve(6);
    marginals_.emplace_back(params_.ret.nig);
    for (const auto& b : params_.beta) {
        marginals_.emplace_back(b.nig);
    }
    for (std::size_t k = 0; k < 6; ++k) {
        marginal_ptrs_[k] = &marginals_[k];
    }
}

double JivrModel::return_anchor(const SurfaceCoeffs& beta) const {
    const double v = params_.ret.omega * iv(0.0, kAnchorTau, beta);
    return v * v;
}

double JivrModel::beta1_anchor(const SurfaceCoeffs& beta) const {
    const double v = params_.omega1 * iv(0.0, kAnchorTau, beta);
    return v * v;
}

InnovationVector JivrModel::draw_innovation(NormalSource& src) const {
    return copula_sample(src, params_.copula, marginal_ptrs_);
}

SurfaceCoeffs JivrModel::var_fixed_point() const {
    Eigen::Matrix<double, 5, 5> a = Eigen::Matrix<double, 5, 5>::Identity() - params_.theta();
    a(1, 1) -= params_.nu;
    Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(a);
    if (!lu.isInvertible()) {
        throw ConfigError("VAR fixed point: I - Theta - nu e2 e2' is singular");
    }
    const SurfaceCoeffs b = lu.solve(params_.alpha());
    if (!b.allFinite()) {
        throw ConfigError("VAR fixed point is not finite");
    }
    return b;
}

MarketState JivrModel::unconditional_state(double S0) const {
    MarketState s;
    s.S = S0;
    s.beta = var_fixed_point();
    s.beta2_lag = s.beta(1);
    s.h_R = return_anchor(s.beta);
    s.h(0) = beta1_anchor(s.beta);
    for (int i = 1; i < 5; ++i) {
        const double sg = params_.sigma(i);
        s.h(i) = sg * sg;
    }
    s.validate();
    return s;
}

double equity_premium(double h_next, const JivrModel& model) {
    if (!(h_next > 0.0)) {
        throw DomainError("equity premium requires a positive variance");
    }
    const auto& p = model.params();
    const NigDistribution& m = model.marginal(0);
    const double s = std::sqrt(h_next * p.delta_t);
    return m.psi(-p.lambda * s) - m.psi((1.0 - p.lambda) * s) + m.psi(s);
}

StepResult step(const MarketState& state, const InnovationVector& eps_prev,
                const InnovationVector& eps_next, const JivrModel& model) {
    const JivrParams& p = model.params();
    const double dt = p.delta_t;
    auto news = [](double eps, double gamma) { return eps * eps - 1.0 - 2.0 * gamma * eps; };

    MarketState next;
    const double Y = model.return_anchor(state.beta);
    const double U = model.beta1_anchor(state.beta);
    next.h_R = Y + p.ret.kappa * (state.h_R - Y) + p.ret.a * state.h_R * news(eps_prev(0), p.ret.gamma);
    {
        const auto& b = p.beta[0];
        next.h(0) = U + b.kappa * (state.h(0) - U) + b.a * state.h(0) * news(eps_prev(1), b.gamma);
    }
    for (int i = 1; i < 5; ++i) {
        const auto& b = p.beta[static_cast<std::size_t>(i)];
        const double sg = p.sigma(i);
        const double s2 = sg * sg;
        next.h(i) = s2 + b.kappa * (state.h(i) - s2) + b.a * state.h(i) * news(eps_prev(i + 1), b.gamma);
    }
    if (!(next.h_R > 0.0) || !(next.h.minCoeff() > 0.0) || !std::isfinite(next.h_R) ||
        !next.h.allFinite()) {
        throw NumericalError("JIVR step produced a non-positive conditional variance");
    }

    const double sR = std::sqrt(next.h_R * dt);
    const double R = equity_premium(next.h_R, model) - model.marginal(0).psi(sR) + sR * eps_next(0);

    for (int i = 0; i < 5; ++i) {
        const auto& b = p.beta[static_cast<std::size_t>(i)];
        double v = b.alpha + b.theta.dot(state.beta.transpose());
        if (i == 1) {
            v += p.nu * state.beta2_lag;
        }
        next.beta(i) = v + std::sqrt(next.h(i) * dt) * eps_next(i + 1);
    }
    next.beta2_lag = state.beta(1);
    next.S = state.S * std::exp(R + (p.r - p.q) * dt);
    return {R, next};
}

MarketState PoolRow::state(double S0) const {
    MarketState s;
    s.S = S0;
    s.beta = beta;
    s.beta2_lag = beta2_lag;
    s.h_R = h_R;
    s.h = h;
    return s;
}

StatePool StatePool::filter(const std::string& label) const {
    StatePool out;
    out.has_cluster = has_cluster;
    for (const auto& row : rows) {
        if (row.cluster == label) {
            out.rows.push_back(row);
        }
    }
    return out;
}

namespace {

const char* const kPoolColumns[] = {"date", "beta1", "beta2", "beta3", "beta4", "beta5", "beta2_lag",
                                    "h_R",  "h1",    "h2",    "h3",    "h4",    "h5"};

}  // namespace

StatePool load_state_pool(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) {
        throw ConfigError("state pool file not found: '" + file.string() + "'");
    }
    const CsvTable t = read_csv(file);
    std::array<int, 13> col{};
    for (std::size_t k = 0; k < 13; ++k) {
        col[k] = t.column(kPoolColumns[k]);
        if (col[k] < 0) {
            throw ConfigError(file.string() + ": missing column '" + kPoolColumns[k] + "'");
        }
    }
    const int cluster_col = t.column("cluster");
    StatePool pool;
    pool.has_cluster = cluster_col >= 0;
    pool.rows.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& f = t.rows[r];
        const std::string where = file.string() + ": row " + std::to_string(r + 1) + " (line " +
                                  std::to_string(t.line_numbers[r]) + ", date " + f[static_cast<std::size_t>(col[0])] +
                                  ")";
        auto num = [&](std::size_t k) {
            const double v = parse_double(f[static_cast<std::size_t>(col[k])], where + " column " + kPoolColumns[k]);
            if (!std::isfinite(v)) {
                throw ConfigError(where + ": column " + kPoolColumns[k] + " is not finite");
            }
            return v;
        };
        PoolRow row;
        row.date = f[static_cast<std::size_t>(col[0])];
        for (int i = 0; i < 5; ++i) {
            row.beta(i) = num(1 + static_cast<std::size_t>(i));
        }
        row.beta2_lag = num(6);
        row.h_R = num(7);
        for (int i = 0; i < 5; ++i) {
            row.h(i) = num(8 + static_cast<std::size_t>(i));
        }
        if (!(row.h_R > 0.0)) {
            throw ConfigError(where + ": h_R must be positive");
        }
        for (int i = 0; i < 5; ++i) {
            if (!(row.h(i) > 0.0)) {
                throw ConfigError(where + ": h" + std::to_string(i + 1) + " must be positive");
            }
        }
        if (cluster_col >= 0) {
            row.cluster = f[static_cast<std::size_t>(cluster_col)];
        }
        pool.rows.push_back(std::move(row));
    }
    return pool;
}

void save_state_pool(const StatePool& pool, const std::filesystem::path& file) {
    std::string out;
    for (std::size_t k = 0; k < 13; ++k) {
        out += (k ? "," : "");
        out += kPoolColumns[k];
    }
    out += pool.has_cluster ? ",cluster\n" : "\n";
    for (const auto& row : pool.rows) {
        out += row.date;
        for (int i = 0; i < 5; ++i) {
            out += "," + format_double(row.beta(i));
        }
        out += "," + format_double(row.beta2_lag);
        out += "," + format_double(row.h_R);
        for (int i = 0; i < 5; ++i) {
            out += "," + format_double(row.h(i));
        }
        if (pool.has_cluster) {
            out += "," + row.cluster;
        }
        out += "\n";
    }
    write_text_file(file, out);
}

StatePool make_synthetic_pool(const JivrModel& model, int burn_in, int n_rows, std::uint64_t seed, int stride) {
    if (burn_in < 252) {
        throw ConfigError("synthetic pool: burn_in must be at least 252 days");
    }
    if (n_rows < 1 || stride < 1) {
        throw ConfigError("synthetic pool: n_rows and stride must be positive");
    }
    NormalSource src(RngStream(seed, 0));
    MarketState s = model.unconditional_state(100.0);
    InnovationVector eps_prev = model.draw_innovation(src);
    StatePool pool;
    const long total = static_cast<long>(burn_in) + static_cast<long>(n_rows - 1) * stride;
    for (long t = 1; t <= total; ++t) {
        const InnovationVector eps = model.draw_innovation(src);
        s = step(s, eps_prev, eps, model).next;
        s.S = 100.0;
        eps_prev = eps;
        if (t >= burn_in && (t - burn_in) % stride == 0) {
            PoolRow row;
            row.date = "synthetic-" + std::to_string(t);
            row.beta = s.beta;
            row.beta2_lag = s.beta2_lag;
            row.h_R = s.h_R;
            row.h = s.h;
            pool.rows.push_back(row);
        }
    }
    // Label each row by the tercile of its one-month at-the-money volatility.
    std::vector<double> atm;
    for (const auto& row : pool.rows) {
        atm.push_back(iv(0.0, 1.0 / 12.0, row.beta));
    }
    std::vector<double> sorted = atm;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted[sorted.size() / 3];
    const double hi = sorted[(2 * sorted.size()) / 3];
    for (std::size_t i = 0; i < pool.rows.size(); ++i) {
        pool.rows[i].cluster = atm[i] < lo ? "low_vol" : (atm[i] < hi ? "mid_vol" : "high_vol");
    }
    pool.has_cluster = true;
    return pool;
}

PathSet simulate(const JivrModel& model, const StatePool& pool, int horizon, Eigen::Index n_paths,
                 std::uint64_t seed, const SimulateOptions& options) {
    if (horizon < 0 || n_paths < 0) {
        throw ConfigError("simulate: horizon and path count must be non-negative");
    }
    const StatePool* source = &pool;
    StatePool filtered;
    if (!options.cluster.empty()) {
        filtered = pool.filter(options.cluster);
        source = &filtered;
    }
    if (source->empty()) {
        throw ConfigError(options.cluster.empty() ? "simulate: state pool is empty"
                                                  : "simulate: no pool rows in cluster '" + options.cluster + "'");
    }
    std::vector<std::int64_t> source_index;
    if (source == &filtered) {
        for (std::size_t k = 0; k < pool.rows.size(); ++k) {
            if (pool.rows[k].cluster == options.cluster) {
                source_index.push_back(static_cast<std::int64_t>(k));
            }
        }
    }

    PathSet out = PathSet::allocate(n_paths, horizon, options.record_innovations);
    out.market = "jivr";
    out.step_years = model.params().delta_t;
    out.r = model.params().r;
    out.q = model.params().q;
    out.seed = seed;
    out.params_hash = sha256_hex(jivr_params_to_json_text(model.params()));

    const auto n_rows = static_cast<double>(source->size());
    parallel_for(n_paths, options.threads, [&](std::ptrdiff_t begin, std::ptrdiff_t end) {
        for (std::ptrdiff_t i = begin; i < end; ++i) {
            NormalSource src(RngStream(seed, static_cast<std::uint64_t>(i)));
            auto k = static_cast<std::size_t>(src.uniform() * n_rows);
            k = std::min(k, source->size() - 1);
            const PoolRow& row = source->rows[k];
            out.pool_row[static_cast<std::size_t>(i)] =
                source_index.empty() ? static_cast<std::int64_t>(k) : source_index[k];
            out.cluster[static_cast<std::size_t>(i)] = row.cluster;

            MarketState s = row.state(options.S0);
            InnovationVector eps_prev = model.draw_innovation(src);
            auto record = [&](int t, const MarketState& st, const InnovationVector& e) {
                out.S(i, t) = st.S;
                for (int f = 0; f < 5; ++f) {
                    out.beta[static_cast<std::size_t>(f)](i, t) = st.beta(f);
                    out.h[static_cast<std::size_t>(f)](i, t) = st.h(f);
                }
                out.beta2_lag(i, t) = st.beta2_lag;
                out.h_R(i, t) = st.h_R;
                if (options.record_innovations) {
                    for (int f = 0; f < 6; ++f) {
                        out.eps[static_cast<std::size_t>(f)](i, t) = e(f);
                    }
                }
            };
            record(0, s, eps_prev);
            for (int t = 1; t <= horizon; ++t) {
                const InnovationVector eps = model.draw_innovation(src);
                s = step(s, eps_prev, eps, model).next;
                eps_prev = eps;
                record(t, s, eps);
            }
        }
    });
    return out;
}

PathSet simulate_black_scholes(double mu, double sigma, double r, double q, int horizon, double step_years,
                               Eigen::Index n_paths, std::uint64_t seed, double S0, int threads) {
    if (!(sigma > 0.0) || !(step_years > 0.0) || horizon < 0 || n_paths < 0) {
        throw ConfigError("Black-Scholes market: sigma and step must be positive");
    }
    PathSet out = PathSet::allocate(n_paths, horizon, false);
    out.market = "black_scholes";
    out.step_years = step_years;
    out.r = r;
    out.q = q;
    out.seed = seed;
    {
        std::ostringstream tag;
        tag << "black_scholes mu=" << format_double(mu) << " sigma=" << format_double(sigma);
        out.params_hash = sha256_hex(tag.str());
    }
    out.beta[0].setConstant(sigma);
    for (int f = 1; f < 5; ++f) {
        out.beta[static_cast<std::size_t>(f)].setZero();
    }
    out.beta2_lag.setZero();
    out.h_R.setConstant(sigma * sigma);
    for (auto& m : out.h) {
        m.setConstant(sigma * sigma);
    }
    const double drift = (mu - 0.5 * sigma * sigma) * step_years;
    const double vol = sigma * std::sqrt(step_years);
    parallel_for(n_paths, threads, [&](std::ptrdiff_t begin, std::ptrdiff_t end) {
        for (std::ptrdiff_t i = begin; i < end; ++i) {
            NormalSource src(RngStream(seed, static_cast<std::uint64_t>(i)));
            double s = S0;
            out.S(i, 0) = s;
            for (int t = 1; t <= horizon; ++t) {
                s *= std::exp(drift + vol * src());
                out.S(i, t) = s;
            }
        }
    });
    return out;
}

namespace {

const char* const kHistoryColumns[] = {"date", "S",   "beta1", "beta2", "beta3", "beta4", "beta5",
                                       "beta2_lag", "h_R", "h1", "h2", "h3", "h4", "h5"};

std::chrono::sys_days parse_date(const std::string& s, const std::string& where) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
        throw ConfigError(where + ": date '" + s + "' is not YYYY-MM-DD");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) {
        throw ConfigError(where + ": invalid date '" + s + "'");
    }
    return std::chrono::sys_days{ymd};
}

bool is_missing(const std::string& f) {
    std::string v;
    for (char c : f) {
        if (c != ' ' && c != '\t') {
            v.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return v.empty() || v == "na" || v == "nan" || v == "null";
}

}  // namespace

PathSet load_history(const std::filesystem::path& file, double r, double q, int max_gap_days) {
    if (!std::filesystem::exists(file)) {
        throw ConfigError("history file not found: '" + file.string() + "'");
    }
    const CsvTable t = read_csv(file);
    std::array<int, 14> col{};
    for (std::size_t k = 0; k < 14; ++k) {
        col[k] = t.column(kHistoryColumns[k]);
        if (col[k] < 0) {
            throw ConfigError(file.string() + ": missing column '" + kHistoryColumns[k] + "'");
        }
    }
    if (t.rows.empty()) {
        throw ConfigError(file.string() + ": no rows");
    }
    std::vector<std::string> missing;
    std::vector<std::string> gaps;
    std::vector<std::chrono::sys_days> days;
    for (std::size_t rr = 0; rr < t.rows.size(); ++rr) {
        const auto& f = t.rows[rr];
        const std::string where = file.string() + ": line " + std::to_string(t.line_numbers[rr]);
        const std::string& date = f[static_cast<std::size_t>(col[0])];
        days.push_back(parse_date(date, where));
        for (std::size_t k = 1; k < 14; ++k) {
            if (is_missing(f[static_cast<std::size_t>(col[k])])) {
                missing.push_back(date);
                break;
            }
        }
        if (rr > 0) {
            const auto gap = (days[rr] - days[rr - 1]).count();
            if (gap <= 0) {
                throw ConfigError(where + ": dates must be strictly increasing");
            }
            if (gap > max_gap_days) {
                gaps.push_back(t.rows[rr - 1][static_cast<std::size_t>(col[0])] + ".." + date);
            }
        }
    }
    if (!missing.empty() || !gaps.empty()) {
        std::string msg = file.string() + ": history has gaps;";
        if (!missing.empty()) {
            msg += " missing values on";
            for (const auto& d : missing) {
                msg += " " + d;
            }
            msg += ";";
        }
        if (!gaps.empty()) {
            msg += " missing dates between";
            for (const auto& g : gaps) {
                msg += " " + g;
            }
        }
        throw ConfigError(msg);
    }
    const int horizon = static_cast<int>(t.rows.size()) - 1;
    PathSet out = PathSet::allocate(1, horizon, false);
    out.market = "history";
    out.r = r;
    out.q = q;
    out.pool_row[0] = -1;
    for (int tt = 0; tt <= horizon; ++tt) {
        const auto& f = t.rows[static_cast<std::size_t>(tt)];
        const std::string where = file.string() + ": line " + std::to_string(t.line_numbers[static_cast<std::size_t>(tt)]);
        auto num = [&](std::size_t k) {
            return parse_double(f[static_cast<std::size_t>(col[k])], where + " column " + kHistoryColumns[k]);
        };
        out.dates.push_back(f[static_cast<std::size_t>(col[0])]);
        out.S(0, tt) = num(1);
        for (int i = 0; i < 5; ++i) {
            out.beta[static_cast<std::size_t>(i)](0, tt) = num(2 + static_cast<std::size_t>(i));
            out.h[static_cast<std::size_t>(i)](0, tt) = num(9 + static_cast<std::size_t>(i));
        }
        out.beta2_lag(0, tt) = num(7);
        out.h_R(0, tt) = num(8);
        if (!(out.S(0, tt) > 0.0)) {
            throw ConfigError(where + ": S must be positive");
        }
    }
    out.params_hash = sha256_file(file);
    return out;
}

}  // namespace ivhedge
