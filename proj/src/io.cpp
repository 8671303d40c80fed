#include "wos/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

namespace wos {

std::pair<nlohmann::json, std::string> split_csv_metadata(const std::string& text) {
  if (text.rfind("# ", 0) != 0) return {nlohmann::json(), text};
  const auto nl = text.find('\n');
  const std::string line = text.substr(2, nl == std::string::npos ? std::string::npos : nl - 2);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("CSV metadata line is not JSON: ") + e.what());
  }
  return {meta, nl == std::string::npos ? std::string() : text.substr(nl + 1)};
}

std::vector<std::vector<std::string>> parse_csv_rows(const std::string& body) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(body);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto c = line.find(',', start);
      fields.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
      if (c == std::string::npos) break;
      start = c + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content, bool overwrite) {
  namespace fs = std::filesystem;
  if (!overwrite && fs::exists(path)) throw ConfigError("'" + path + "' exists; pass --force to overwrite");
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

namespace {

std::string digest_hex(const EVP_MD* md, const std::string& data) {
  unsigned char buf[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, md, nullptr) != 1 || EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, buf, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("digest computation failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[buf[i] >> 4];
    out += hex[buf[i] & 15];
  }
  return out;
}

}  // namespace

std::string sha256_hex(const std::string& data) { return digest_hex(EVP_sha256(), data); }

std::string git_blob_sha1(const std::string& data) {
  std::string blob = "blob " + std::to_string(data.size());
  blob.push_back('\0');
  blob += data;
  return digest_hex(EVP_sha1(), blob);
}

nlohmann::json RunManifest::to_json() const {
  return {{"version", version}, {"subcommand", subcommand}, {"config", config},     {"seed", seed},
          {"workers", workers}, {"started", started},       {"finished", finished}, {"outputs", outputs}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string measure_to_csv(const DiscreteMeasure& mu, double alpha, double resolution_floor) {
  const int d = mu.dim();
  nlohmann::json meta = {{"kind", "measure"}, {"alpha", alpha}, {"d", d}, {"resolution_floor", resolution_floor},
                         {"atoms", mu.size()}};
  std::ostringstream os;
  os << "# " << meta.dump() << '\n';
  for (int i = 0; i < d; ++i) os << 'x' << (i + 1) << ',';
  os << "weight\n";
  for (const auto& a : mu.atoms()) {
    for (int i = 0; i < d; ++i) os << format_double(a.point[i]) << ',';
    os << format_double(a.weight) << '\n';
  }
  return os.str();
}

MeasureFile measure_from_csv(const std::string& text) {
  auto [meta, body] = split_csv_metadata(text);
  const auto rows = parse_csv_rows(body);
  if (rows.empty()) throw ConfigError("measure CSV: missing header row");
  const int d = static_cast<int>(rows.front().size()) - 1;
  if (d < 1 || d > kMaxDim || rows.front().back() != "weight")
    throw ConfigError("measure CSV: header must be x1,...,xd,weight");
  MeasureFile out{DiscreteMeasure(d), meta.is_object() ? meta : nlohmann::json::object()};
  try {
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (static_cast<int>(rows[r].size()) != d + 1)
        throw ConfigError("measure CSV: row " + std::to_string(r) + " has wrong width");
      Point p(d);
      for (int i = 0; i < d; ++i) p[i] = std::stod(rows[r][static_cast<std::size_t>(i)]);
      out.measure.add(p, std::stod(rows[r].back()));
    }
  } catch (const std::invalid_argument& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(std::string("measure CSV: malformed number: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Axis {
  bool log = false;
  double lo = 0.0;
  double hi = 1.0;

  double map(double v) const { return log ? std::log10(v) : v; }
};

std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6.0) break;
  }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<':
        o += "&lt;";
        break;
      case '>':
        o += "&gt;";
        break;
      case '&':
        o += "&amp;";
        break;
      case '"':
        o += "&quot;";
        break;
      default:
        o += c;
    }
  }
  return o;
}

}  // namespace

std::string svg_line_chart(const std::vector<SvgSeries>& series, const SvgChart& chart) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  Axis ax{chart.log_x}, ay{chart.log_y};
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ConfigError("svg: series '" + s.label + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((chart.log_x && !(s.x[i] > 0.0)) || (chart.log_y && !(s.y[i] > 0.0)))
        throw ConfigError("svg: log axis needs positive values");
      xmin = std::min(xmin, ax.map(s.x[i]));
      xmax = std::max(xmax, ax.map(s.x[i]));
      ymin = std::min(ymin, ay.map(s.y[i]));
      ymax = std::max(ymax, ay.map(s.y[i]));
    }
  }
  if (!std::isfinite(xmin)) throw ConfigError("svg: no data");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const double padx = 0.04 * (xmax - xmin), pady = 0.06 * (ymax - ymin);
  ax.lo = xmin - padx;
  ax.hi = xmax + padx;
  ay.lo = ymin - pady;
  ay.hi = ymax + pady;

  const double L = 80, R = 30, T = 50, B = 60;
  const double W = chart.width, H = chart.height;
  auto px = [&](double v) { return L + (v - ax.lo) / (ax.hi - ax.lo) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - ay.lo) / (ay.hi - ay.lo) * (H - T - B); };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
     << "\" viewBox=\"0 0 " << chart.width << ' ' << chart.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(chart.title)
     << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : linear_ticks(ax.lo, ax.hi)) {
    const double x = px(t);
    os << "<line x1=\"" << x << "\" y1=\"" << H - B << "\" x2=\"" << x << "\" y2=\"" << H - B + 5
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << x << "\" y1=\"" << T << "\" x2=\"" << x << "\" y2=\"" << H - B
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
       << (ax.log ? "1e" + tick_label(t) : tick_label(t)) << "</text>\n";
  }
  for (double t : linear_ticks(ay.lo, ay.hi)) {
    const double y = py(t);
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << W - R << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
       << (ay.log ? "1e" + tick_label(t) : tick_label(t)) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
     << escape_xml(chart.x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape_xml(chart.y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colors[k % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? " " : "") << px(ax.map(s.x[i])) << ',' << py(ay.map(s.y[i]));
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx=\"" << px(ax.map(s.x[i])) << "\" cy=\"" << py(ay.map(s.y[i])) << "\" r=\"3\" fill=\"" << c
         << "\"/>\n";
    const double ly = T + 16 + 16.0 * static_cast<double>(k);
    os << "<line x1=\"" << L + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << L + 32 << "\" y2=\"" << ly - 4
       << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << L + 38 << "\" y=\"" << ly << "\">" << escape_xml(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace wos
