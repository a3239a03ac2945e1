#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ideotrace/errors.hpp"

namespace ideotrace {

/// One raw share record: user posted a link to a news domain at a time.
/// The domain is stored normalized (lowercase, no scheme, no "www.", no path).
struct ShareEvent {
  std::string user_id;
  std::string domain;
  std::int64_t timestamp = 0;  // seconds since epoch, >= 0
};

/// Lowercase, strip scheme and leading "www.", cut at the first '/'.
/// Throws DataError if the result is empty or contains whitespace.
std::string normalize_domain(const std::string& raw);

struct BinningConfig {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::int64_t bin_width = 14 * 24 * 3600;  // two weeks
  int min_shares_per_bin = 4;
  int max_websites = 1000000;  // top-popularity cutoff

  /// Number of bins, ceil((end-start)/bin_width). Valid configs have >= 2.
  int bin_count() const;
  void validate() const;  // throws std::invalid_argument
};

/// Sparse binary M x N matrix stored as a sorted coordinate list.
/// Convention: first = website index i (row), second = user index j (column).
struct SparseBinary {
  std::vector<std::pair<int, int>> coords;

  bool contains(int website, int user) const;
  std::size_t nnz() const { return coords.size(); }

  /// Website indices shared by each user (coords regrouped by column).
  std::vector<std::vector<int>> by_user(int n_users) const;
};

/// The sequence {Y^t}: per-bin binary share indicators over a fixed
/// user/website universe. All bins share the same index maps.
struct TimeBinnedObservations {
  std::vector<std::string> user_index;     // size N, lexicographic
  std::vector<std::string> website_index;  // size M, by popularity rank
  std::vector<SparseBinary> bins;          // size T+1

  int num_users() const { return static_cast<int>(user_index.size()); }
  int num_websites() const { return static_cast<int>(website_index.size()); }
  int num_bins() const { return static_cast<int>(bins.size()); }
  int num_steps() const { return num_bins() - 1; }  // T

  /// Union of all bins' coordinates, sorted.
  SparseBinary pooled() const;

  void save(const std::filesystem::path& path) const;
  static TimeBinnedObservations load(const std::filesystem::path& path);
};

/// Undirected unweighted user graph with its Laplacian L = D - A.
struct SocialGraph {
  int n_users = 0;
  std::vector<std::pair<int, int>> edges;  // stored (min,max), sorted, unique
  Eigen::MatrixXd laplacian;               // N x N

  /// Normalizes, dedupes and sorts edges, then assembles the Laplacian.
  /// Self-loops are rejected with DataError.
  static SocialGraph from_edges(int n_users, std::vector<std::pair<int, int>> edges);

  void save(const std::filesystem::path& path) const;
  static SocialGraph load(const std::filesystem::path& path);
};

/// Ordinal website ideology labels, coded -3 (extreme left) .. +3 (extreme
/// right), plus derived scalar user ground-truth ideology once evaluation
/// has populated it. Website labels may be partial.
struct LabelSet {
  std::map<std::string, int> website_labels;
  std::map<std::string, double> user_ground_truth;

  void save(const std::filesystem::path& path) const;
  static LabelSet load_artifact(const std::filesystem::path& path);
};

/// Parse a share-event log and bin it.
///   - events outside [start, end) are dropped
///   - users lacking min_shares_per_bin events in any bin are removed
///   - websites ranked by total share count, ties broken lexicographically,
///     truncated to max_websites
/// Throws DataError with the line number on an unparseable row and
/// "no qualifying users/websites" when the universe empties.
TimeBinnedObservations ingest_events(const std::filesystem::path& events_file,
                                     const BinningConfig& config);

struct GraphBuild {
  SocialGraph graph;
  std::size_t self_loops_skipped = 0;
};

/// Parse an edge list restricted to the observation user universe.
/// Pairs referencing unknown users are silently dropped; self-loops are
/// skipped and counted; a malformed row raises DataError with its line.
GraphBuild build_graph(const std::filesystem::path& edge_file,
                       const std::vector<std::string>& user_index);

/// Parse a (domain, ordinal code) label file. Codes outside [-3, 3] and
/// conflicting duplicates raise DataError.
LabelSet load_labels(const std::filesystem::path& label_file);

/// Labels aligned to a website index; entries without a label are NaN.
/// Also reports how many index entries carry a label.
std::pair<Eigen::VectorXd, int> labels_for_index(
    const LabelSet& labels, const std::vector<std::string>& website_index);

}  // namespace ideotrace
