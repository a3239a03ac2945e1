#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ideotrace/interaction_data.hpp"
#include "ideotrace/rng.hpp"

using namespace ideotrace;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ideotrace_iface_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path file(const std::string& name, const std::string& content) const {
    fs::path p = path / name;
    std::ofstream out(p);
    out << content;
    return p;
  }
};

const std::int64_t kWeek2 = 14 * 24 * 3600;

BinningConfig two_bins(int min_shares = 4, int max_websites = 10) {
  BinningConfig cfg;
  cfg.start = 0;
  cfg.end = 2 * kWeek2;
  cfg.bin_width = kWeek2;
  cfg.min_shares_per_bin = min_shares;
  cfg.max_websites = max_websites;
  return cfg;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("single active user aggregates to a 1x1 universe") {
  TempDir dir;
  std::string log;
  for (int t = 0; t < 2; ++t) {
    for (int rep = 0; rep < 4; ++rep) {
      log += "alice\tnews.com\t" + std::to_string(t * kWeek2 + rep * 100) + "\n";
    }
  }
  auto obs = ingest_events(dir.file("events.tsv", log), two_bins());
  CHECK(obs.num_users() == 1);
  CHECK(obs.num_websites() == 1);
  REQUIRE(obs.num_bins() == 2);
  CHECK(obs.bins[0].coords == std::vector<std::pair<int, int>>{{0, 0}});
  CHECK(obs.bins[1].coords == std::vector<std::pair<int, int>>{{0, 0}});
}

TEST_CASE("a user below the floor in one bin is removed") {
  TempDir dir;
  std::string log;
  for (int rep = 0; rep < 4; ++rep) log += "bob\ta.com\t" + std::to_string(rep) + "\n";
  for (int rep = 0; rep < 3; ++rep) {
    log += "bob\ta.com\t" + std::to_string(kWeek2 + rep) + "\n";
  }
  CHECK_THROWS_WITH_AS(ingest_events(dir.file("events.tsv", log), two_bins()),
                       "no qualifying users/websites", DataError);
}

TEST_CASE("incidence matches a brute-force enumeration on a synthetic log") {
  TempDir dir;
  Rng rng(31);
  const std::vector<std::string> users{"u1", "u2", "u3"};
  const std::vector<std::string> domains{"a.com", "b.com", "c.com", "d.com", "e.com"};
  std::string log;
  // (user, domain, bin) incidence built independently of the parser.
  std::set<std::tuple<std::string, std::string, int>> expected;
  for (int t = 0; t < 2; ++t) {
    for (const auto& u : users) {
      // Guarantee the floor with one domain, then add random extras.
      for (int rep = 0; rep < 4; ++rep) {
        log += u + "\t" + domains[0] + "\t" + std::to_string(t * kWeek2 + rep) + "\n";
      }
      expected.insert({u, domains[0], t});
      for (const auto& d : domains) {
        if (rng.bernoulli(0.5)) {
          log += u + "\t" + d + "\t" + std::to_string(t * kWeek2 + 50) + "\n";
          expected.insert({u, d, t});
        }
      }
    }
  }
  auto obs = ingest_events(dir.file("events.tsv", log), two_bins(4, 100));
  CHECK(obs.num_users() == 3);
  std::set<std::tuple<std::string, std::string, int>> got;
  for (int t = 0; t < obs.num_bins(); ++t) {
    for (const auto& [i, j] : obs.bins[t].coords) {
      got.insert({obs.user_index[j], obs.website_index[i], t});
    }
  }
  CHECK(got == expected);
}

TEST_CASE("website ranking truncates by popularity with lexicographic ties") {
  TempDir dir;
  std::string log;
  // bin-spanning activity; b.com 3 shares, a.com 2, c.com 2 -> top2 = b, a.
  auto add = [&](const std::string& d, int count, int base_ts) {
    for (int rep = 0; rep < count; ++rep) {
      log += "u\t" + d + "\t" + std::to_string(base_ts + rep) + "\n";
    }
  };
  add("b.com", 3, 0);
  add("a.com", 2, 10);
  add("c.com", 2, 20);
  add("b.com", 1, kWeek2);
  add("a.com", 2, kWeek2 + 10);
  add("c.com", 2, kWeek2 + 20);
  // totals: b=4, a=4, c=4 -> all tied, lex: a, b, c; truncate to 2 -> a, b.
  auto obs = ingest_events(dir.file("events.tsv", log), two_bins(4, 2));
  CHECK(obs.website_index == std::vector<std::string>{"a.com", "b.com"});
}

TEST_CASE("domains are normalized and events outside the window dropped") {
  TempDir dir;
  std::string log;
  for (int t = 0; t < 2; ++t) {
    for (int rep = 0; rep < 4; ++rep) {
      log += "carol\tHTTPS://WWW.Fox.COM/politics/article" + std::to_string(rep) +
             "\t" + std::to_string(t * kWeek2 + rep) + "\n";
    }
  }
  log += "carol\tignored.com\t" + std::to_string(5 * kWeek2) + "\n";  // outside
  auto obs = ingest_events(dir.file("events.tsv", log), two_bins());
  CHECK(obs.website_index == std::vector<std::string>{"fox.com"});
}

TEST_CASE("unparseable event rows report their line number") {
  TempDir dir;
  std::string log = "u\ta.com\t0\nu\ta.com\n";
  try {
    ingest_events(dir.file("events.tsv", log), two_bins());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  std::string bad_ts = "u\ta.com\tnot_a_number\n";
  CHECK_THROWS_AS(ingest_events(dir.file("bad.tsv", bad_ts), two_bins()), DataError);
  CHECK_THROWS_AS(ingest_events(dir.path / "missing.tsv", two_bins()), DataError);
}

TEST_CASE("binning config invariants") {
  BinningConfig cfg = two_bins();
  CHECK_NOTHROW(cfg.validate());
  cfg.end = cfg.start;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = two_bins();
  cfg.bin_width = 3 * kWeek2;  // single bin
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = two_bins();
  cfg.min_shares_per_bin = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("path graph Laplacian") {
  TempDir dir;
  auto edges = dir.file("edges.tsv", "u0\tu1\nu1\tu2\n");
  auto built = build_graph(edges, {"u0", "u1", "u2"});
  Eigen::MatrixXd expected(3, 3);
  expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK(built.graph.laplacian == expected);
  CHECK(built.self_loops_skipped == 0);
}

TEST_CASE("empty edge file gives the zero Laplacian") {
  TempDir dir;
  auto built = build_graph(dir.file("edges.tsv", ""), {"a", "b"});
  CHECK(built.graph.laplacian == Eigen::MatrixXd::Zero(2, 2));
}

TEST_CASE("duplicate edges collapse; self-loops are counted and skipped") {
  TempDir dir;
  auto edges = dir.file("edges.tsv", "u0\tu1\nu1\tu0\nu0\tu1\nu2\tu2\n");
  auto built = build_graph(edges, {"u0", "u1", "u2"});
  CHECK(built.graph.edges == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(built.graph.laplacian(0, 0) == 1.0);
  CHECK(built.self_loops_skipped == 1);
}

TEST_CASE("edges touching filtered users are dropped; malformed rows error") {
  TempDir dir;
  auto edges = dir.file("edges.tsv", "u0\tghost\nu0\tu1\n");
  auto built = build_graph(edges, {"u0", "u1"});
  CHECK(built.graph.edges.size() == 1);

  auto bad = dir.file("bad.tsv", "u0\n");
  try {
    build_graph(bad, {"u0", "u1"});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("Laplacian invariants on random graphs") {
  Rng rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 3 + rng.uniform_int(8);
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (rng.bernoulli(0.4)) edges.emplace_back(a, b);
      }
    }
    auto g = SocialGraph::from_edges(n, edges);
    CHECK(g.laplacian.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.laplacian == g.laplacian.transpose().eval());

    // Quadratic-form identity against brute-force edge summation.
    Eigen::MatrixXd C(n, 3);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < 3; ++k) C(j, k) = rng.normal();
    }
    const double quad = (C.transpose() * g.laplacian * C).trace();
    double edge_sum = 0;
    for (const auto& [a, b] : g.edges) {
      edge_sum += (C.row(a) - C.row(b)).squaredNorm();
    }
    CHECK(quad == doctest::Approx(edge_sum).epsilon(1e-10));
  }
}

TEST_CASE("label code table and error paths") {
  TempDir dir;
  auto labels = load_labels(dir.file("labels.tsv", "foxnews.com\t2\nnytimes.com\t-1\n"));
  CHECK(labels.website_labels.at("foxnews.com") == 2);
  CHECK(labels.website_labels.at("nytimes.com") == -1);

  auto empty = load_labels(dir.file("empty.tsv", ""));
  CHECK(empty.website_labels.empty());

  CHECK_THROWS_AS(load_labels(dir.file("range.tsv", "a.com\t4\n")), DataError);
  CHECK_THROWS_AS(load_labels(dir.file("conflict.tsv", "a.com\t1\na.com\t2\n")), DataError);
  CHECK_NOTHROW(load_labels(dir.file("dupe.tsv", "a.com\t1\na.com\t1\n")));

  auto [aligned, found] = labels_for_index(labels, {"nytimes.com", "unknown.org"});
  CHECK(found == 1);
  CHECK(aligned[0] == -1.0);
  CHECK(std::isnan(aligned[1]));
}

TEST_CASE("ingestion is deterministic byte for byte") {
  TempDir dir;
  std::string log;
  Rng rng(5);
  for (int t = 0; t < 2; ++t) {
    for (int u = 0; u < 4; ++u) {
      for (int rep = 0; rep < 5; ++rep) {
        log += "user" + std::to_string(u) + "\tsite" + std::to_string(rng.uniform_int(6)) +
               ".com\t" + std::to_string(t * kWeek2 + rep * 7) + "\n";
      }
    }
  }
  auto events = dir.file("events.tsv", log);
  auto obs1 = ingest_events(events, two_bins(4, 100));
  auto obs2 = ingest_events(events, two_bins(4, 100));
  obs1.save(dir.path / "obs1.tsv");
  obs2.save(dir.path / "obs2.tsv");
  CHECK(file_bytes(dir.path / "obs1.tsv") == file_bytes(dir.path / "obs2.tsv"));

  auto loaded = TimeBinnedObservations::load(dir.path / "obs1.tsv");
  loaded.save(dir.path / "obs3.tsv");
  CHECK(file_bytes(dir.path / "obs1.tsv") == file_bytes(dir.path / "obs3.tsv"));
}

TEST_CASE("removing one user leaves other users' columns untouched") {
  TempDir dir;
  Rng rng(9);
  auto make_log = [&](bool include_u9) {
    Rng local(9);
    std::string log;
    for (int t = 0; t < 2; ++t) {
      for (int u = 0; u < 5; ++u) {
        for (int rep = 0; rep < 4; ++rep) {
          log += "user" + std::to_string(u) + "\tsite" +
                 std::to_string(local.uniform_int(4)) + ".com\t" +
                 std::to_string(t * kWeek2 + rep) + "\n";
        }
      }
    }
    if (include_u9) {
      for (int t = 0; t < 2; ++t) {
        for (int rep = 0; rep < 6; ++rep) {
          log += "user9\tsite" + std::to_string(rep % 4) + ".com\t" +
                 std::to_string(t * kWeek2 + rep) + "\n";
        }
      }
    }
    return log;
  };

  auto with = ingest_events(dir.file("with.tsv", make_log(true)), two_bins(4, 100));
  auto without = ingest_events(dir.file("without.tsv", make_log(false)), two_bins(4, 100));

  auto columns = [](const TimeBinnedObservations& obs) {
    std::map<std::pair<std::string, int>, std::set<std::string>> cols;
    for (int t = 0; t < obs.num_bins(); ++t) {
      for (const auto& [i, j] : obs.bins[t].coords) {
        cols[{obs.user_index[j], t}].insert(obs.website_index[i]);
      }
    }
    return cols;
  };
  auto with_cols = columns(with);
  auto without_cols = columns(without);
  for (const auto& [key, sites] : without_cols) {
    CHECK(with_cols.at(key) == sites);
  }
}

TEST_CASE("graph and label artifacts round-trip") {
  TempDir dir;
  auto g = SocialGraph::from_edges(4, {{0, 1}, {2, 3}, {1, 2}});
  g.save(dir.path / "graph.tsv");
  auto loaded = SocialGraph::load(dir.path / "graph.tsv");
  CHECK(loaded.edges == g.edges);
  CHECK(loaded.laplacian == g.laplacian);

  LabelSet labels;
  labels.website_labels = {{"a.com", -3}, {"b.com", 0}, {"c.com", 2}};
  labels.save(dir.path / "labels.tsv");
  auto lloaded = LabelSet::load_artifact(dir.path / "labels.tsv");
  CHECK(lloaded.website_labels == labels.website_labels);
}
