#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"
#include "ivhedge/manifest.hpp"
#include "ivhedge/pathset.hpp"

namespace ivhedge {

static_assert(std::endian::native == std::endian::little, "binary PathSet format assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr const char* kPathsetFormat = "ivhedge-pathset";

/// Ordered (name, matrix) views of every stored field.
template <typename P, typename Fn>
void for_each_field(P& p, Fn&& fn) {
    fn("S", p.S);
    for (int i = 0; i < 5; ++i) {
        fn("beta" + std::to_string(i + 1), p.beta[static_cast<std::size_t>(i)]);
    }
    fn("beta2_lag", p.beta2_lag);
    fn("h_R", p.h_R);
    for (int i = 0; i < 5; ++i) {
        fn("h" + std::to_string(i + 1), p.h[static_cast<std::size_t>(i)]);
    }
    if (p.has_innovations()) {
        fn("eps_R", p.eps[0]);
        for (int i = 1; i < 6; ++i) {
            fn("eps_" + std::to_string(i), p.eps[static_cast<std::size_t>(i)]);
        }
    }
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
    std::filesystem::path p = stem;
    p += ext;
    return p;
}

}  // namespace

PathSet PathSet::allocate(Eigen::Index n_paths, int horizon, bool with_innovations) {
    PathSet p;
    p.n_paths = n_paths;
    p.horizon = horizon;
    const Eigen::Index cols = horizon + 1;
    p.S.resize(n_paths, cols);
    for (auto& m : p.beta) {
        m.resize(n_paths, cols);
    }
    p.beta2_lag.resize(n_paths, cols);
    p.h_R.resize(n_paths, cols);
    for (auto& m : p.h) {
        m.resize(n_paths, cols);
    }
    if (with_innovations) {
        for (auto& m : p.eps) {
            m.resize(n_paths, cols);
        }
    }
    p.pool_row.assign(static_cast<std::size_t>(n_paths), -1);
    p.cluster.assign(static_cast<std::size_t>(n_paths), std::string());
    return p;
}

void PathSet::validate_shape() const {
    const Eigen::Index cols = horizon + 1;
    for_each_field(*this, [&](const std::string& name, const Eigen::MatrixXd& m) {
        if (m.rows() != n_paths || m.cols() != cols) {
            throw ConfigError("PathSet field " + name + " has shape " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + ", expected " + std::to_string(n_paths) + "x" +
                              std::to_string(cols));
        }
    });
    if (pool_row.size() != static_cast<std::size_t>(n_paths) || cluster.size() != static_cast<std::size_t>(n_paths)) {
        throw ConfigError("PathSet per-path metadata does not match the path count");
    }
    if (!dates.empty() && dates.size() != static_cast<std::size_t>(cols)) {
        throw ConfigError("PathSet date labels do not match the horizon");
    }
}

PathSet PathSet::select(std::span<const Eigen::Index> rows) const {
    PathSet out = allocate(static_cast<Eigen::Index>(rows.size()), horizon, has_innovations());
    out.market = market;
    out.step_years = step_years;
    out.r = r;
    out.q = q;
    out.seed = seed;
    out.params_hash = params_hash;
    out.dates = dates;
    auto copy = [&](const Eigen::MatrixXd& src, Eigen::MatrixXd& dst) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            dst.row(static_cast<Eigen::Index>(k)) = src.row(rows[k]);
        }
    };
    copy(S, out.S);
    for (std::size_t f = 0; f < 5; ++f) {
        copy(beta[f], out.beta[f]);
        copy(h[f], out.h[f]);
    }
    copy(beta2_lag, out.beta2_lag);
    copy(h_R, out.h_R);
    if (has_innovations()) {
        for (std::size_t f = 0; f < 6; ++f) {
            copy(eps[f], out.eps[f]);
        }
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.pool_row[k] = pool_row[static_cast<std::size_t>(rows[k])];
        out.cluster[k] = cluster[static_cast<std::size_t>(rows[k])];
    }
    return out;
}

PathSet PathSet::select_range(Eigen::Index begin, Eigen::Index count) const {
    if (begin < 0 || count < 0 || begin + count > n_paths) {
        throw UsageError("PathSet::select_range out of bounds");
    }
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(count));
    for (Eigen::Index k = 0; k < count; ++k) {
        rows[static_cast<std::size_t>(k)] = begin + k;
    }
    return select(rows);
}

PathSet PathSet::slice_steps(int t0, int t1) const {
    if (t0 < 0 || t1 < t0 || t1 > horizon) {
        throw UsageError("PathSet::slice_steps out of bounds");
    }
    PathSet out = allocate(n_paths, t1 - t0, has_innovations());
    out.market = market;
    out.step_years = step_years;
    out.r = r;
    out.q = q;
    out.seed = seed;
    out.params_hash = params_hash;
    out.pool_row = pool_row;
    out.cluster = cluster;
    const int n = t1 - t0 + 1;
    out.S = S.middleCols(t0, n);
    for (std::size_t f = 0; f < 5; ++f) {
        out.beta[f] = beta[f].middleCols(t0, n);
        out.h[f] = h[f].middleCols(t0, n);
    }
    out.beta2_lag = beta2_lag.middleCols(t0, n);
    out.h_R = h_R.middleCols(t0, n);
    if (has_innovations()) {
        for (std::size_t f = 0; f < 6; ++f) {
            out.eps[f] = eps[f].middleCols(t0, n);
        }
    }
    if (!dates.empty()) {
        out.dates.assign(dates.begin() + t0, dates.begin() + t1 + 1);
    }
    return out;
}

void save_pathset(const PathSet& paths, const std::filesystem::path& stem) {
    paths.validate_shape();
    std::string blob;
    json fields = json::array();
    for_each_field(paths, [&](const std::string& name, const Eigen::MatrixXd& m) {
        fields.push_back(name);
        const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
        const std::size_t off = blob.size();
        blob.resize(off + bytes);
        if (bytes > 0) {
            std::memcpy(blob.data() + off, m.data(), bytes);
        }
    });
    const auto bin = with_suffix(stem, ".bin");
    write_text_file(bin, blob);

    json j;
    j["format"] = kPathsetFormat;
    j["version"] = 1;
    j["market"] = paths.market;
    j["n_paths"] = paths.n_paths;
    j["horizon"] = paths.horizon;
    j["step_years"] = paths.step_years;
    j["r"] = paths.r;
    j["q"] = paths.q;
    j["seed"] = paths.seed;
    j["params_sha256"] = paths.params_hash;
    j["fields"] = fields;
    j["layout"] = "float64 little-endian; fields in order; each n_paths x (horizon+1) column-major";
    j["data_file"] = bin.filename().string();
    j["data_sha256"] = sha256_hex(blob);
    j["pool_row"] = paths.pool_row;
    j["cluster"] = paths.cluster;
    j["dates"] = paths.dates;
    write_text_file(with_suffix(stem, ".json"), j.dump(2) + "\n");
}

PathSet load_pathset(const std::filesystem::path& stem) {
    const auto meta_file = with_suffix(stem, ".json");
    const auto bin = with_suffix(stem, ".bin");
    if (!std::filesystem::exists(meta_file)) {
        throw ConfigError("PathSet sidecar not found: '" + meta_file.string() + "'");
    }
    json j;
    try {
        j = json::parse(read_text_file(meta_file));
    } catch (const json::exception& e) {
        throw ConfigError(meta_file.string() + ": invalid JSON: " + e.what());
    }
    if (j.value("format", std::string()) != kPathsetFormat || j.value("version", 0) != 1) {
        throw ConfigError(meta_file.string() + ": not a version-1 PathSet sidecar");
    }
    const std::string blob = read_text_file(bin);
    if (sha256_hex(blob) != j.at("data_sha256").get<std::string>()) {
        throw ConfigError(bin.string() + ": checksum does not match the sidecar");
    }
    const auto fields = j.at("fields").get<std::vector<std::string>>();
    PathSet p = PathSet::allocate(j.at("n_paths").get<Eigen::Index>(), j.at("horizon").get<int>(),
                                  fields.size() > 13);
    p.market = j.at("market").get<std::string>();
    p.step_years = j.at("step_years").get<double>();
    p.r = j.at("r").get<double>();
    p.q = j.at("q").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.params_hash = j.at("params_sha256").get<std::string>();
    p.pool_row = j.at("pool_row").get<std::vector<std::int64_t>>();
    p.cluster = j.at("cluster").get<std::vector<std::string>>();
    p.dates = j.at("dates").get<std::vector<std::string>>();

    std::size_t off = 0;
    std::size_t index = 0;
    for_each_field(p, [&](const std::string& name, Eigen::MatrixXd& m) {
        if (index >= fields.size() || fields[index] != name) {
            throw ConfigError(meta_file.string() + ": unexpected field list");
        }
        ++index;
        const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
        if (off + bytes > blob.size()) {
            throw ConfigError(bin.string() + ": file is truncated");
        }
        if (bytes > 0) {
            std::memcpy(m.data(), blob.data() + off, bytes);
        }
        off += bytes;
    });
    if (off != blob.size() || index != fields.size()) {
        throw ConfigError(bin.string() + ": size does not match the sidecar");
    }
    p.validate_shape();
    return p;
}

void export_pathset_csv(const PathSet& paths, const std::filesystem::path& file) {
    paths.validate_shape();
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write '" + file.string() + "'");
    }
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> cols;
    for_each_field(paths, [&](const std::string& name, const Eigen::MatrixXd& m) { cols.emplace_back(name, &m); });
    out << "path_id,t";
    if (!paths.dates.empty()) {
        out << ",date";
    }
    for (const auto& c : cols) {
        out << ',' << c.first;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < paths.n_paths; ++i) {
        for (int t = 0; t <= paths.horizon; ++t) {
            out << i << ',' << t;
            if (!paths.dates.empty()) {
                out << ',' << paths.dates[static_cast<std::size_t>(t)];
            }
            for (const auto& c : cols) {
                out << ',' << format_double((*c.second)(i, t));
            }
            out << '\n';
        }
    }
    if (!out) {
        throw ConfigError("write failed for '" + file.string() + "'");
    }
}

}  // namespace ivhedge
