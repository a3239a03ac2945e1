#include "ideotrace/interaction_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace ideotrace {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return fields;
}

// getline, tolerating trailing CR.
bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  return in;
}

bool parse_int64(const std::string& s, std::int64_t& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

bool parse_int(const std::string& s, int& out) {
  std::int64_t v;
  if (!parse_int64(s, v)) return false;
  if (v < INT32_MIN || v > INT32_MAX) return false;
  out = static_cast<int>(v);
  return true;
}

[[noreturn]] void bad_line(const std::filesystem::path& path, std::size_t line_no,
                           const std::string& why) {
  throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + why);
}

bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string normalize_domain(const std::string& raw) {
  std::string d = raw;
  std::transform(d.begin(), d.end(), d.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (const char* scheme : {"https://", "http://"}) {
    if (d.rfind(scheme, 0) == 0) {
      d = d.substr(std::string(scheme).size());
      break;
    }
  }
  if (d.rfind("www.", 0) == 0) d = d.substr(4);
  if (auto slash = d.find('/'); slash != std::string::npos) d = d.substr(0, slash);
  if (d.empty() || has_whitespace(d)) {
    throw DataError("invalid domain token: '" + raw + "'");
  }
  return d;
}

int BinningConfig::bin_count() const {
  return static_cast<int>((end - start + bin_width - 1) / bin_width);
}

void BinningConfig::validate() const {
  if (start >= end) throw std::invalid_argument("binning: start must precede end");
  if (bin_width <= 0) throw std::invalid_argument("binning: bin_width must be positive");
  if (min_shares_per_bin < 1) {
    throw std::invalid_argument("binning: min_shares_per_bin must be >= 1");
  }
  if (max_websites < 1) throw std::invalid_argument("binning: max_websites must be >= 1");
  if (bin_count() < 2) throw std::invalid_argument("binning: need at least 2 bins");
}

bool SparseBinary::contains(int website, int user) const {
  return std::binary_search(coords.begin(), coords.end(),
                            std::make_pair(website, user));
}

std::vector<std::vector<int>> SparseBinary::by_user(int n_users) const {
  std::vector<std::vector<int>> sites(n_users);
  for (const auto& [i, j] : coords) sites[j].push_back(i);
  return sites;
}

SparseBinary TimeBinnedObservations::pooled() const {
  SparseBinary p;
  for (const auto& bin : bins) {
    p.coords.insert(p.coords.end(), bin.coords.begin(), bin.coords.end());
  }
  std::sort(p.coords.begin(), p.coords.end());
  p.coords.erase(std::unique(p.coords.begin(), p.coords.end()), p.coords.end());
  return p;
}

TimeBinnedObservations ingest_events(const std::filesystem::path& events_file,
                                     const BinningConfig& config) {
  config.validate();
  auto in = open_or_throw(events_file);
  const int n_bins = config.bin_count();

  struct Event {
    std::string user;
    std::string domain;
    int bin;
  };
  std::vector<Event> events;

  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) bad_line(events_file, line_no, "expected 3 tab-separated fields");
    if (fields[0].empty() || has_whitespace(fields[0])) {
      bad_line(events_file, line_no, "invalid user id");
    }
    std::int64_t ts;
    if (!parse_int64(fields[2], ts) || ts < 0) {
      bad_line(events_file, line_no, "invalid timestamp '" + fields[2] + "'");
    }
    std::string domain;
    try {
      domain = normalize_domain(fields[1]);
    } catch (const DataError& e) {
      bad_line(events_file, line_no, e.what());
    }
    if (ts < config.start || ts >= config.end) continue;
    int bin = static_cast<int>((ts - config.start) / config.bin_width);
    events.push_back({std::move(fields[0]), std::move(domain), bin});
  }

  // Per-bin event counts; a user qualifies with >= min shares in every bin.
  std::unordered_map<std::string, std::vector<int>> per_bin_counts;
  for (const auto& e : events) {
    auto& counts = per_bin_counts[e.user];
    if (counts.empty()) counts.assign(n_bins, 0);
    ++counts[e.bin];
  }
  std::vector<std::string> users;
  for (const auto& [user, counts] : per_bin_counts) {
    bool ok = std::all_of(counts.begin(), counts.end(), [&](int c) {
      return c >= config.min_shares_per_bin;
    });
    if (ok) users.push_back(user);
  }
  std::sort(users.begin(), users.end());

  std::unordered_map<std::string, int> user_pos;
  for (std::size_t j = 0; j < users.size(); ++j) user_pos[users[j]] = static_cast<int>(j);

  // Popularity ranking over qualifying users' events; ties lexicographic.
  std::unordered_map<std::string, long> site_counts;
  for (const auto& e : events) {
    if (user_pos.count(e.user)) ++site_counts[e.domain];
  }
  std::vector<std::pair<std::string, long>> ranked(site_counts.begin(), site_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > static_cast<std::size_t>(config.max_websites)) {
    ranked.resize(config.max_websites);
  }

  if (users.empty() || ranked.empty()) {
    throw DataError("no qualifying users/websites");
  }

  TimeBinnedObservations obs;
  obs.user_index = std::move(users);
  obs.website_index.reserve(ranked.size());
  std::unordered_map<std::string, int> site_pos;
  for (const auto& [domain, count] : ranked) {
    site_pos[domain] = static_cast<int>(obs.website_index.size());
    obs.website_index.push_back(domain);
  }

  obs.bins.assign(n_bins, {});
  for (const auto& e : events) {
    auto uit = user_pos.find(e.user);
    auto sit = site_pos.find(e.domain);
    if (uit == user_pos.end() || sit == site_pos.end()) continue;
    obs.bins[e.bin].coords.emplace_back(sit->second, uit->second);
  }
  for (auto& bin : obs.bins) {
    std::sort(bin.coords.begin(), bin.coords.end());
    bin.coords.erase(std::unique(bin.coords.begin(), bin.coords.end()),
                     bin.coords.end());
  }
  return obs;
}

SocialGraph SocialGraph::from_edges(int n_users,
                                    std::vector<std::pair<int, int>> edges) {
  for (auto& [a, b] : edges) {
    if (a == b) throw DataError("self-loop in edge set");
    if (a < 0 || b < 0 || a >= n_users || b >= n_users) {
      throw DataError("edge endpoint out of range");
    }
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  SocialGraph g;
  g.n_users = n_users;
  g.edges = std::move(edges);
  g.laplacian = Eigen::MatrixXd::Zero(n_users, n_users);
  for (const auto& [a, b] : g.edges) {
    g.laplacian(a, a) += 1.0;
    g.laplacian(b, b) += 1.0;
    g.laplacian(a, b) -= 1.0;
    g.laplacian(b, a) -= 1.0;
  }
  return g;
}

GraphBuild build_graph(const std::filesystem::path& edge_file,
                       const std::vector<std::string>& user_index) {
  auto in = open_or_throw(edge_file);
  std::unordered_map<std::string, int> user_pos;
  for (std::size_t j = 0; j < user_index.size(); ++j) {
    user_pos[user_index[j]] = static_cast<int>(j);
  }

  std::vector<std::pair<int, int>> edges;
  std::size_t self_loops = 0;
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      bad_line(edge_file, line_no, "expected 2 tab-separated user ids");
    }
    if (fields[0] == fields[1]) {
      ++self_loops;
      continue;
    }
    auto a = user_pos.find(fields[0]);
    auto b = user_pos.find(fields[1]);
    if (a == user_pos.end() || b == user_pos.end()) continue;  // filtered user
    edges.emplace_back(a->second, b->second);
  }
  GraphBuild result;
  result.graph = SocialGraph::from_edges(static_cast<int>(user_index.size()),
                                         std::move(edges));
  result.self_loops_skipped = self_loops;
  return result;
}

LabelSet load_labels(const std::filesystem::path& label_file) {
  auto in = open_or_throw(label_file);
  LabelSet labels;
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2) bad_line(label_file, line_no, "expected domain and code");
    std::string domain;
    try {
      domain = normalize_domain(fields[0]);
    } catch (const DataError& e) {
      bad_line(label_file, line_no, e.what());
    }
    int code;
    if (!parse_int(fields[1], code) || code < -3 || code > 3) {
      bad_line(label_file, line_no, "ideology code must be an integer in [-3, 3]");
    }
    auto [it, inserted] = labels.website_labels.emplace(domain, code);
    if (!inserted && it->second != code) {
      bad_line(label_file, line_no, "conflicting duplicate label for '" + domain + "'");
    }
  }
  return labels;
}

std::pair<Eigen::VectorXd, int> labels_for_index(
    const LabelSet& labels, const std::vector<std::string>& website_index) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(website_index.size()),
      std::numeric_limits<double>::quiet_NaN());
  int found = 0;
  for (std::size_t i = 0; i < website_index.size(); ++i) {
    auto it = labels.website_labels.find(website_index[i]);
    if (it != labels.website_labels.end()) {
      v[static_cast<Eigen::Index>(i)] = it->second;
      ++found;
    }
  }
  return {v, found};
}

// ---------------------------------------------------------------------------
// Serialization

void TimeBinnedObservations::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "IDEOTRACE-OBS v1\n";
  out << num_websites() << '\t' << num_users() << '\t' << num_steps() << '\n';
  for (const auto& d : website_index) out << d << '\n';
  for (const auto& u : user_index) out << u << '\n';
  for (int t = 0; t < num_bins(); ++t) {
    out << "bin\t" << t << '\t' << bins[t].nnz() << '\n';
    for (const auto& [i, j] : bins[t].coords) out << i << '\t' << j << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

TimeBinnedObservations TimeBinnedObservations::load(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::string line;
  if (!read_line(in, line) || line != "IDEOTRACE-OBS v1") {
    throw DataError(path.string() + ": not an IDEOTRACE-OBS v1 file");
  }
  if (!read_line(in, line)) throw DataError(path.string() + ": truncated header");
  auto dims = split_tabs(line);
  int m = 0, n = 0, steps = 0;
  if (dims.size() != 3 || !parse_int(dims[0], m) || !parse_int(dims[1], n) ||
      !parse_int(dims[2], steps) || m <= 0 || n <= 0 || steps < 0) {
    throw DataError(path.string() + ": bad dimension line");
  }
  TimeBinnedObservations obs;
  obs.website_index.reserve(m);
  for (int i = 0; i < m; ++i) {
    if (!read_line(in, line) || line.empty()) {
      throw DataError(path.string() + ": truncated website index");
    }
    obs.website_index.push_back(line);
  }
  obs.user_index.reserve(n);
  for (int j = 0; j < n; ++j) {
    if (!read_line(in, line) || line.empty()) {
      throw DataError(path.string() + ": truncated user index");
    }
    obs.user_index.push_back(line);
  }
  obs.bins.resize(steps + 1);
  for (int t = 0; t <= steps; ++t) {
    if (!read_line(in, line)) throw DataError(path.string() + ": missing bin header");
    auto fields = split_tabs(line);
    int bt = 0, nnz = 0;
    if (fields.size() != 3 || fields[0] != "bin" || !parse_int(fields[1], bt) ||
        bt != t || !parse_int(fields[2], nnz) || nnz < 0) {
      throw DataError(path.string() + ": bad bin header for bin " + std::to_string(t));
    }
    obs.bins[t].coords.reserve(nnz);
    for (int k = 0; k < nnz; ++k) {
      if (!read_line(in, line)) throw DataError(path.string() + ": truncated bin");
      auto c = split_tabs(line);
      int i = 0, j = 0;
      if (c.size() != 2 || !parse_int(c[0], i) || !parse_int(c[1], j) || i < 0 ||
          j < 0 || i >= m || j >= n) {
        throw DataError(path.string() + ": bad coordinate in bin " + std::to_string(t));
      }
      obs.bins[t].coords.emplace_back(i, j);
    }
    if (!std::is_sorted(obs.bins[t].coords.begin(), obs.bins[t].coords.end())) {
      throw DataError(path.string() + ": unsorted coordinates in bin " + std::to_string(t));
    }
  }
  return obs;
}

void SocialGraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "IDEOTRACE-GRAPH v1\n";
  out << n_users << '\t' << edges.size() << '\n';
  for (const auto& [a, b] : edges) out << a << '\t' << b << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

SocialGraph SocialGraph::load(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::string line;
  if (!read_line(in, line) || line != "IDEOTRACE-GRAPH v1") {
    throw DataError(path.string() + ": not an IDEOTRACE-GRAPH v1 file");
  }
  if (!read_line(in, line)) throw DataError(path.string() + ": truncated header");
  auto dims = split_tabs(line);
  int n = 0, e = 0;
  if (dims.size() != 2 || !parse_int(dims[0], n) || !parse_int(dims[1], e) ||
      n <= 0 || e < 0) {
    throw DataError(path.string() + ": bad dimension line");
  }
  std::vector<std::pair<int, int>> edges;
  edges.reserve(e);
  for (int k = 0; k < e; ++k) {
    if (!read_line(in, line)) throw DataError(path.string() + ": truncated edges");
    auto f = split_tabs(line);
    int a = 0, b = 0;
    if (f.size() != 2 || !parse_int(f[0], a) || !parse_int(f[1], b)) {
      throw DataError(path.string() + ": bad edge line");
    }
    edges.emplace_back(a, b);
  }
  return SocialGraph::from_edges(n, std::move(edges));
}

void LabelSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "IDEOTRACE-LABELS v1\n";
  out << website_labels.size() << '\n';
  for (const auto& [domain, code] : website_labels) {
    out << domain << '\t' << code << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

LabelSet LabelSet::load_artifact(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::string line;
  if (!read_line(in, line) || line != "IDEOTRACE-LABELS v1") {
    throw DataError(path.string() + ": not an IDEOTRACE-LABELS v1 file");
  }
  if (!read_line(in, line)) throw DataError(path.string() + ": truncated header");
  int count = 0;
  if (!parse_int(line, count) || count < 0) {
    throw DataError(path.string() + ": bad label count");
  }
  LabelSet labels;
  for (int k = 0; k < count; ++k) {
    if (!read_line(in, line)) throw DataError(path.string() + ": truncated labels");
    auto f = split_tabs(line);
    int code = 0;
    if (f.size() != 2 || !parse_int(f[1], code) || code < -3 || code > 3) {
      throw DataError(path.string() + ": bad label line");
    }
    labels.website_labels[f[0]] = code;
  }
  return labels;
}

}  // namespace ideotrace
