#include "stencilml/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stencilml/error.hpp"

namespace stencilml {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "stencilml-dataset";

void append_real(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

json field_json(const std::array<TestField, 3>& fields) {
  json out = json::object();
  for (const auto& f : fields) {
    if (const auto* m = std::get_if<Monomial>(&f)) out["monomial"] = {{"n", m->n}, {"m", m->m}};
    if (const auto* s = std::get_if<Sinusoidal>(&f)) out["sinusoidal"] = {{"kx", s->kx}, {"ky", s->ky}};
    if (const auto* e = std::get_if<Exponential>(&f)) out["exponential"] = {{"sigma", e->sigma}};
  }
  return out;
}

std::array<TestField, 3> fields_from_json(const json& j) {
  return {Monomial{j.at("monomial").at("n").get<int>(), j.at("monomial").at("m").get<int>()},
          Sinusoidal{j.at("sinusoidal").at("kx").get<double>(), j.at("sinusoidal").at("ky").get<double>()},
          Exponential{j.at("exponential").at("sigma").get<double>()}};
}

json header_json(const Dataset& ds) {
  const GenConfig& g = ds.meta.gen;
  json borders = json::object();
  for (const auto& [size, cuts] : ds.borders.per_size) borders[std::to_string(size)] = cuts;
  return json{
      {"format", kFormatName},
      {"version", kDatasetFormatVersion},
      {"seed", g.seed},
      {"sizes", ds.meta.sizes},
      {"count_per_size", ds.meta.count_per_size},
      {"max_size", ds.max_size},
      {"generation",
       {{"domain", {g.domain.lo.x, g.domain.lo.y, g.domain.hi.x, g.domain.hi.y}},
        {"spacing_h", g.spacing_h},
        {"candidate_pool", g.candidate_pool},
        {"decay_beta", g.decay_beta}}},
      {"fields", field_json(ds.meta.fields)},
      {"field_coordinates", "normalized"},
      {"borders", borders},
      {"padding", "central-node"},
      {"epsilon_reduction", "sum |d/dx| + |d/dy| + |laplacian| over fields"},
  };
}

void parse_header(const json& h, Dataset& ds) {
  if (h.at("format").get<std::string>() != kFormatName) throw std::runtime_error("not a stencil dataset");
  GenConfig& g = ds.meta.gen;
  g.seed = h.at("seed").get<std::uint64_t>();
  ds.meta.sizes = h.at("sizes").get<std::vector<int>>();
  ds.meta.count_per_size = h.at("count_per_size").get<int>();
  ds.max_size = h.at("max_size").get<int>();
  const json& gen = h.at("generation");
  const auto dom = gen.at("domain").get<std::array<double, 4>>();
  g.domain = Rect{{dom[0], dom[1]}, {dom[2], dom[3]}};
  g.spacing_h = gen.at("spacing_h").get<double>();
  g.candidate_pool = gen.at("candidate_pool").get<int>();
  g.decay_beta = gen.at("decay_beta").get<double>();
  ds.meta.fields = fields_from_json(h.at("fields"));
  for (const auto& [key, cuts] : h.at("borders").items()) {
    ds.borders.per_size[std::stoi(key)] = cuts.get<std::array<double, 3>>();
  }
}

std::string record_line(const LabeledStencil& rec) {
  std::string line = std::to_string(rec.size());
  for (const Point2& p : rec.stencil.coords) {
    line += ',';
    append_real(line, p.x);
    line += ',';
    append_real(line, p.y);
  }
  line += ',';
  append_real(line, rec.epsilon);
  line += ',';
  line += rec.quartile ? std::to_string(index_of(*rec.quartile) + 1) : std::string("0");
  return line;
}

double parse_real(std::string_view token) {
  std::string tmp(token);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size() || !std::isfinite(v)) {
    throw std::runtime_error("bad number '" + tmp + "'");
  }
  return v;
}

int parse_int(std::string_view token) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw std::runtime_error("bad integer '" + std::string(token) + "'");
  }
  return v;
}

LabeledStencil parse_record(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    tokens.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  const int s = parse_int(tokens.at(0));
  if (s < 1) throw std::runtime_error("stencil size must be positive");
  if (tokens.size() != static_cast<std::size_t>(2 * s + 3)) {
    throw std::runtime_error("expected " + std::to_string(2 * s + 3) + " fields, found " +
                             std::to_string(tokens.size()));
  }
  LabeledStencil rec;
  rec.stencil.coords.resize(s);
  for (int i = 0; i < s; ++i) {
    rec.stencil.coords[i] = {parse_real(tokens[1 + 2 * i]), parse_real(tokens[2 + 2 * i])};
  }
  rec.epsilon = parse_real(tokens[2 * s + 1]);
  if (rec.epsilon < 0.0) throw std::runtime_error("negative epsilon");
  const int cls = parse_int(tokens[2 * s + 2]);
  if (cls < 0 || cls > kNumQuartiles) throw std::runtime_error("class must be 0 (unset) or 1..4");
  if (cls > 0) rec.quartile = quartile_from_index(cls - 1);
  return rec;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << header_json(ds).dump() << '\n';
  for (const auto& rec : ds.records) out << record_line(rec) << '\n';
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Data, "cannot open '" + path + "' for writing");
  write_dataset(out, ds);
  if (!out) throw Error(ErrorKind::Data, "failed writing '" + path + "'");
}

Dataset read_dataset(std::istream& in, const std::string& source) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty dataset file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(source, 1, std::string("bad header: ") + e.what());
  }
  const int version = header.value("version", -1);
  if (version != kDatasetFormatVersion) {
    throw ParseError(source, 1, "unsupported dataset format version " + std::to_string(version));
  }
  try {
    parse_header(header, ds);
  } catch (const std::exception& e) {
    throw ParseError(source, 1, std::string("bad header: ") + e.what());
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      LabeledStencil rec = parse_record(line);
      if (rec.size() > ds.max_size) throw std::runtime_error("stencil larger than max_size");
      ds.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  const std::size_t expected = ds.meta.sizes.size() * static_cast<std::size_t>(ds.meta.count_per_size);
  if (ds.records.size() != expected) {
    throw ParseError(source, 0,
                     "header promises " + std::to_string(expected) + " records, found " +
                         std::to_string(ds.records.size()));
  }
  return ds;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, "cannot open dataset '" + path + "'");
  return read_dataset(in, path);
}

std::uint64_t dataset_fingerprint(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : out.str()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace stencilml
