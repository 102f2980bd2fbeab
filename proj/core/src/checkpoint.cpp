#include "dgflow/checkpoint.hpp"

#include "binio.hpp"
#include "dgflow/dataset.hpp"

namespace dgflow {

namespace {
constexpr char kMagic[4] = {'D', 'G', 'F', 'C'};

void put_values(binio::Writer& w, const Tensor& t) {
  for (double v : t.values()) w.put<double>(v);
}
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  binio::Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_string(c.model);
  w.put_string(c.arch.to_json());
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.precision));
  w.put<std::uint64_t>(c.params.size());
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    w.put_string(c.params.name(i));
    const Tensor& t = c.params[i];
    w.put<std::uint64_t>(t.rank());
    for (std::size_t d : t.shape()) w.put<std::uint64_t>(d);
    put_values(w, t);
  }
  w.put<std::uint8_t>(c.friction ? 1 : 0);
  if (c.friction) {
    w.put<std::uint64_t>(c.friction->numel());
    put_values(w, *c.friction);
  }
  w.put_string(c.config);
  w.put<std::uint32_t>(crc32_bytes(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a checkpoint: unknown magic bytes");
  if (bytes.size() < 12) throw FormatError("checkpoint checksum mismatch (truncated)");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 3; i >= 0; --i) stored = (stored << 8) | bytes[body + static_cast<std::size_t>(i)];
  binio::Reader r(bytes, body);
  r.get<std::uint32_t>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  if (stored != crc32_bytes(bytes.data(), body)) throw FormatError("checkpoint checksum mismatch");

  Checkpoint c;
  c.model = r.get_string();
  c.arch = ArchSpec::from_json(r.get_string());
  const auto prec = r.get<std::uint8_t>();
  if (prec > 1) throw FormatError("bad precision tag");
  c.precision = static_cast<Precision>(prec);
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string name = r.get_string();
    const auto rank = r.get<std::uint64_t>();
    if (rank > 8) throw FormatError("bad tensor rank");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.get<std::uint64_t>();
      numel *= d;
    }
    r.need(8 * numel);
    std::vector<double> v(numel);
    for (double& x : v) x = r.get<double>();
    c.params.add(name, Tensor(shape, std::move(v), c.precision));
  }
  if (r.get<std::uint8_t>()) {
    const auto k = r.get<std::uint64_t>();
    r.need(8 * k);
    std::vector<double> v(k);
    for (double& x : v) x = r.get<double>();
    c.friction = Tensor::vector(std::move(v), c.precision);
  }
  c.config = r.get_string();
  if (r.pos() != body) throw FormatError("trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  binio::write_file(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binio::read_file(path));
}

}  // namespace dgflow
