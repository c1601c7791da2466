#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ivhedge {

/// Columnar storage of market trajectories. Every state matrix is
/// n_paths x (horizon + 1); column t holds all paths at step t.
struct PathSet {
    std::string market = "jivr";
    Eigen::Index n_paths = 0;
    int horizon = 0;
    double step_years = 1.0 / 252.0;
    double r = 0.0;
    double q = 0.0;

    Eigen::MatrixXd S;
    std::array<Eigen::MatrixXd, 5> beta;
    Eigen::MatrixXd beta2_lag;
    Eigen::MatrixXd h_R;
    std::array<Eigen::MatrixXd, 5> h;
    /// Innovations eps_t (R, 1..5); column 0 is the pre-sample draw. Empty unless recorded.
    std::array<Eigen::MatrixXd, 6> eps;

    std::vector<std::int64_t> pool_row;  ///< initial-state row per path (-1 if none)
    std::vector<std::string> cluster;    ///< initial-state cluster label per path
    std::vector<std::string> dates;      ///< horizon + 1 labels for historical series

    std::uint64_t seed = 0;
    std::string params_hash;

    static PathSet allocate(Eigen::Index n_paths, int horizon, bool with_innovations = false);

    bool has_innovations() const { return eps[0].size() > 0; }

    /// Paths `rows`, in that order.
    PathSet select(std::span<const Eigen::Index> rows) const;
    /// Contiguous block of paths.
    PathSet select_range(Eigen::Index begin, Eigen::Index count) const;
    /// Steps t0..t1 inclusive of every path.
    PathSet slice_steps(int t0, int t1) const;

    /// Throws ConfigError on inconsistent shapes.
    void validate_shape() const;
};

/// Writes `<stem>.bin` (little-endian float64, field-major, each field stored column-major)
/// and the JSON sidecar `<stem>.json` describing shape, seed, parameter hash and checksum.
void save_pathset(const PathSet& paths, const std::filesystem::path& stem);
PathSet load_pathset(const std::filesystem::path& stem);
void export_pathset_csv(const PathSet& paths, const std::filesystem::path& file);

}  // namespace ivhedge
