#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "wos/potentials.hpp"

namespace wos {

/// Round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Splits "# {json}\nbody" into its metadata and body; metadata is null when
/// the first line is not a comment.
std::pair<nlohmann::json, std::string> split_csv_metadata(const std::string& text);
std::vector<std::vector<std::string>> parse_csv_rows(const std::string& body);

std::string read_text_file(const std::string& path);
/// Refuses to overwrite an existing file unless `overwrite`.
void write_text_file(const std::string& path, const std::string& content, bool overwrite);

std::string sha256_hex(const std::string& data);
/// Hash git assigns to a blob with this content.
std::string git_blob_sha1(const std::string& data);

struct RunManifest {
  std::string version;
  std::string subcommand;
  nlohmann::json config;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string started;
  std::string finished;
  std::map<std::string, std::string> outputs;  ///< file name -> sha256

  nlohmann::json to_json() const;
};

/// ISO-8601 UTC timestamp.
std::string utc_timestamp();

/// "x1,...,xd,weight" rows under a "# {alpha, d, resolution_floor}" line.
std::string measure_to_csv(const DiscreteMeasure& mu, double alpha, double resolution_floor);

struct MeasureFile {
  DiscreteMeasure measure;
  nlohmann::json metadata;
};
MeasureFile measure_from_csv(const std::string& text);

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct SvgChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 720;
  int height = 480;
};

/// Standalone SVG line chart with axes, ticks and a legend.
std::string svg_line_chart(const std::vector<SvgSeries>& series, const SvgChart& chart);

}  // namespace wos
