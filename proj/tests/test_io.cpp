#include <filesystem>

#include "doctest.h"
#include "wos/io.hpp"

using namespace wos;

TEST_CASE("doubles round-trip through text") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("CSV metadata and rows") {
  const auto [meta, body] = split_csv_metadata("# {\"seed\": 3}\na,b\n1,2\n");
  CHECK(meta["seed"] == 3);
  CHECK(body == "a,b\n1,2\n");
  const auto rows = parse_csv_rows(body);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][1] == "2");
  const auto [none, plain] = split_csv_metadata("a,b\n");
  CHECK(none.is_null());
  CHECK(plain == "a,b\n");
}

TEST_CASE("digests") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("files refuse to be overwritten without permission") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "wos_io_test";
  fs::remove_all(dir);
  const std::string path = (dir / "sub" / "a.txt").string();
  write_text_file(path, "one", false);
  CHECK(read_text_file(path) == "one");
  CHECK_THROWS_AS(write_text_file(path, "two", false), ConfigError);
  write_text_file(path, "two", true);
  CHECK(read_text_file(path) == "two");
  CHECK_THROWS_AS(read_text_file((dir / "missing").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("measures round-trip through CSV") {
  DiscreteMeasure mu(3);
  mu.add(Point{1.0 / 3.0, -2.0, 0.5}, 0.125);
  mu.add(Point{1e-17, 1.5, -0.25}, 1.0 / 7.0);
  const std::string text = measure_to_csv(mu, 2.5, 0.01);
  const auto back = measure_from_csv(text);
  CHECK(back.metadata["alpha"] == 2.5);
  CHECK(back.metadata["d"] == 3);
  CHECK(back.metadata["resolution_floor"] == 0.01);
  REQUIRE(back.measure.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.measure.atoms()[i].point == mu.atoms()[i].point);
    CHECK(back.measure.atoms()[i].weight == mu.atoms()[i].weight);
  }
  CHECK(text.find("x1,x2,x3,weight") != std::string::npos);
  CHECK_THROWS_AS(measure_from_csv("x1,weight\n0.5,-1\n"), ConfigError);
}

TEST_CASE("manifests") {
  RunManifest m{"0.1.0", "sweep", {{"a", 1}}, 7, 2, "t0", "t1", {{"sweep.csv", sha256_hex("x")}}};
  const auto j = m.to_json();
  CHECK(j["version"] == "0.1.0");
  CHECK(j["seed"] == 7);
  CHECK(j["outputs"]["sweep.csv"] == sha256_hex("x"));
  CHECK(utc_timestamp().back() == 'Z');
}

TEST_CASE("SVG charts") {
  SvgChart c;
  c.title = "steps";
  c.log_x = true;
  c.log_y = true;
  const std::string svg = svg_line_chart({{"mean", {16, 64, 256}, {5, 9, 13}}, {"fit", {16, 256}, {5, 13}}}, c);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("mean") != std::string::npos);
}
