#include "dgflow/dataset.hpp"

#include <zlib.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "binio.hpp"
#include "dgflow/errors.hpp"

namespace dgflow {

namespace binio {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace binio

std::uint32_t crc32_bytes(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void Trajectory::validate() const {
  if (states.rank() != 2) throw ShapeError("trajectory states must be [T x dim]");
  if (states.dim(0) != times.size())
    throw ShapeError("trajectory has " + std::to_string(times.size()) + " times but " +
                     std::to_string(states.dim(0)) + " states");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("trajectory times are not strictly increasing");
}

double Trajectory::uniform_dt(double tol) const {
  if (times.size() < 2) throw std::invalid_argument("trajectory has fewer than two samples");
  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i)
    if (std::abs(times[i] - times[i - 1] - dt) > tol)
      throw std::invalid_argument("trajectory steps are not uniform");
  return dt;
}

std::size_t Dataset::dim() const {
  for (const auto* s : {&train, &test, &long_term})
    if (!s->empty()) return s->front().dim();
  throw std::invalid_argument("dataset is empty");
}

const std::vector<Trajectory>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "test") return test;
  if (name == "long_term") return long_term;
  throw std::invalid_argument("unknown split '" + name + "'");
}

PairSet PairSet::gather(const std::vector<std::size_t>& idx) const {
  const std::size_t d = u0.dim(1);
  std::vector<double> a(idx.size() * d), b(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= size()) throw std::out_of_range("pair index out of range");
    for (std::size_t j = 0; j < d; ++j) {
      a[r * d + j] = u0.at(idx[r], j);
      b[r * d + j] = u1.at(idx[r], j);
    }
  }
  return {Tensor::matrix(idx.size(), d, std::move(a), u0.precision()),
          Tensor::matrix(idx.size(), d, std::move(b), u1.precision()), dt};
}

PairSet make_pairs(const std::vector<Trajectory>& trajectories, double dt, double rel_tol) {
  if (trajectories.empty()) throw std::invalid_argument("no trajectories to pair");
  if (!(dt > 0.0)) throw std::invalid_argument("pair step must be positive");
  const std::size_t d = trajectories.front().dim();
  std::vector<double> a, b;
  for (const auto& tr : trajectories) {
    tr.validate();
    if (tr.dim() != d) throw ShapeError("trajectories differ in state dimension");
    for (std::size_t t = 0; t + 1 < tr.length(); ++t) {
      if (std::abs(tr.times[t + 1] - tr.times[t] - dt) > rel_tol * dt)
        throw std::invalid_argument("trajectory step deviates from dt");
      for (std::size_t j = 0; j < d; ++j) {
        a.push_back(tr.states.at(t, j));
        b.push_back(tr.states.at(t + 1, j));
      }
    }
  }
  const std::size_t m = a.size() / d;
  if (m == 0) throw std::invalid_argument("trajectories are too short to pair");
  return {Tensor::matrix(m, d, std::move(a)), Tensor::matrix(m, d, std::move(b)), dt};
}

namespace {
constexpr char kMagic[4] = {'D', 'G', 'F', 'D'};
}

std::vector<std::uint8_t> encode_split(const std::vector<Trajectory>& split, Precision p) {
  binio::Writer w;
  const std::size_t steps = split.empty() ? 0 : split.front().length();
  const std::size_t dim = split.empty() ? 0 : split.front().dim();
  for (const auto& tr : split) {
    tr.validate();
    if (tr.length() != steps || tr.dim() != dim)
      throw ShapeError("every trajectory of a split must have the same length and dimension");
  }
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint64_t>(split.size());
  w.put<std::uint64_t>(steps);
  w.put<std::uint64_t>(dim);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p));
  for (const auto& tr : split) w.put<std::uint64_t>(tr.seed);
  for (const auto& tr : split)
    for (double v : tr.states.values()) w.put<double>(v);
  for (const auto& tr : split)
    for (double v : tr.times) w.put<double>(v);
  w.put<std::uint32_t>(crc32_bytes(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

std::vector<Trajectory> decode_split(const std::vector<std::uint8_t>& bytes, Precision* p) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a dataset split: unknown magic bytes");
  binio::Reader head(bytes, bytes.size());
  head.need(8);
  head.get<std::uint32_t>();
  const auto version = head.get<std::uint32_t>();
  if (version != kDatasetVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version));
  if (bytes.size() < 4 + 4 + 8 * 3 + 1 + 4) throw FormatError("dataset split checksum mismatch (truncated)");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 3; i >= 0; --i) stored = (stored << 8) | bytes[body + static_cast<std::size_t>(i)];
  if (stored != crc32_bytes(bytes.data(), body))
    throw FormatError("dataset split checksum mismatch");

  binio::Reader r(bytes, body);
  r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  const auto n = r.get<std::uint64_t>();
  const auto steps = r.get<std::uint64_t>();
  const auto dim = r.get<std::uint64_t>();
  const auto prec = r.get<std::uint8_t>();
  if (prec > 1) throw FormatError("bad precision tag");
  const Precision precision = static_cast<Precision>(prec);
  if (p) *p = precision;
  const std::uint64_t expect = 8 * n + 8 * n * steps * dim + 8 * n * steps;
  if (body - r.pos() != expect) throw FormatError("dataset split size does not match its header");
  std::vector<Trajectory> out(n);
  for (auto& tr : out) tr.seed = r.get<std::uint64_t>();
  for (auto& tr : out) {
    std::vector<double> s(steps * dim);
    for (double& v : s) v = r.get<double>();
    tr.states = Tensor::matrix(steps, dim, std::move(s), precision);
  }
  for (auto& tr : out) {
    tr.times.resize(steps);
    for (double& v : tr.times) v = r.get<double>();
    tr.validate();
  }
  return out;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["format"] = "dgflow-dataset";
  m["version"] = kDatasetVersion;
  m["system"] = ds.system;
  m["params"] = ds.params;
  m["seed"] = ds.seed;
  m["dt"] = ds.dt;
  m["dx"] = ds.dx;
  m["noise"] = ds.noise;
  m["precision"] = to_string(ds.precision);
  m["notes"] = ds.notes;
  nlohmann::json splits = nlohmann::json::object();
  for (const char* name : {"train", "test", "long_term"}) {
    const auto& s = ds.split(name);
    if (s.empty()) continue;
    const auto bytes = encode_split(s, ds.precision);
    binio::write_file(dir / (std::string(name) + ".bin"), bytes);
    splits[name] = {{"trajectories", s.size()},
                    {"steps", s.front().length()},
                    {"dim", s.front().dim()},
                    {"crc32", crc32_bytes(bytes.data(), bytes.size() - 4)}};
  }
  m["splits"] = splits;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << m.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  if (!std::filesystem::exists(mpath)) throw std::runtime_error("no dataset manifest in " + dir.string());
  nlohmann::json m;
  try {
    std::ifstream in(mpath);
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset manifest: ") + e.what());
  }
  Dataset ds;
  try {
    if (m.at("format") != "dgflow-dataset") throw FormatError("not a dataset manifest");
    if (m.at("version").get<std::uint32_t>() != kDatasetVersion)
      throw FormatError("unsupported dataset version");
    ds.system = m.at("system").get<std::string>();
    ds.params = m.at("params").get<std::map<std::string, double>>();
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.dt = m.at("dt").get<double>();
    ds.dx = m.at("dx").get<double>();
    ds.noise = m.at("noise").get<double>();
    ds.precision = precision_from_string(m.at("precision").get<std::string>());
    ds.notes = m.at("notes").get<std::map<std::string, std::string>>();
    for (auto& [name, info] : m.at("splits").items()) {
      auto& target = name == "train" ? ds.train : name == "test" ? ds.test : ds.long_term;
      if (name != "train" && name != "test" && name != "long_term")
        throw FormatError("unknown split '" + name + "'");
      target = decode_split(binio::read_file(dir / (name + ".bin")));
      if (target.size() != info.at("trajectories").get<std::size_t>())
        throw FormatError("split '" + name + "' size differs from the manifest");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset manifest: ") + e.what());
  }
  return ds;
}

}  // namespace dgflow
