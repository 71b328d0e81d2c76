#include "deepnmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace deepnmt {

namespace {

constexpr char kMagic[8] = {'D', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void u8(std::uint8_t v) { os_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) u64(e);
    for (double v : t.values()) f64(v);
  }

 private:
  void le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os_.write(buf, bytes);
  }
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw CheckpointError("checkpoint string length " + std::to_string(n) + " is implausible");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  Tensor tensor() {
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 8) throw CheckpointError("checkpoint tensor rank " + std::to_string(rank) + " unsupported");
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& e : shape) {
      e = u64();
      if (e == 0 || e > (std::uint64_t{1} << 32)) throw CheckpointError("checkpoint tensor extent out of range");
      n *= e;
    }
    if (n > (std::uint64_t{1} << 32)) throw CheckpointError("checkpoint tensor too large");
    std::vector<double> data(n);
    for (auto& v : data) v = f64();
    return Tensor(shape, std::move(data));
  }
  void read(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw CheckpointError("checkpoint truncated");
  }

 private:
  std::uint64_t le(int bytes) {
    unsigned char buf[8];
    read(reinterpret_cast<char*>(buf), static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& is_;
};

}  // namespace

void write_checkpoint(std::ostream& os, const CheckpointBundle& bundle) {
  Writer w(os);
  os.write(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u64(bundle.step);
  const auto kv = bundle.config.to_kv();
  w.u32(static_cast<std::uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    w.str(k);
    w.str(v);
  }
  const auto& names = bundle.params.names();
  w.u32(static_cast<std::uint32_t>(names.size()));
  for (const auto& name : names) {
    w.str(name);
    if (bundle.params.is_alias(name)) {
      w.u8(1);
      w.str(bundle.params.canonical(name));
    } else {
      w.u8(0);
      const InitRecord& rec = bundle.params.init(name);
      w.u8(static_cast<std::uint8_t>(rec.policy));
      w.u64(rec.layer);
      w.f64(rec.bound);
      w.f64(rec.stddev);
      w.tensor(bundle.params.at(name));
    }
  }
  w.u8(bundle.optimizer ? 1 : 0);
  if (bundle.optimizer) {
    const OptimizerState& s = *bundle.optimizer;
    w.u64(s.step);
    w.u32(static_cast<std::uint32_t>(s.m.size()));
    for (const auto& [name, m] : s.m) {
      w.str(name);
      w.tensor(m);
      auto it = s.v.find(name);
      if (it == s.v.end()) throw CheckpointError("optimizer state lacks second moment for '" + name + "'");
      w.tensor(it->second);
    }
  }
  if (!os) throw CheckpointError("failed to write checkpoint");
}

CheckpointBundle read_checkpoint(std::istream& is) {
  Reader r(is);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw CheckpointError("not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  CheckpointBundle b;
  b.step = r.u64();
  std::map<std::string, std::string> kv;
  for (std::uint32_t i = 0, n = r.u32(); i < n; ++i) {
    std::string k = r.str();
    kv[k] = r.str();
  }
  try {
    b.config = ModelConfig::from_kv(kv);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }
  for (std::uint32_t i = 0, n = r.u32(); i < n; ++i) {
    std::string name = r.str();
    const std::uint8_t kind = r.u8();
    if (kind == 1) {
      b.params.alias(name, r.str());
    } else if (kind == 0) {
      InitRecord rec;
      const std::uint8_t policy = r.u8();
      if (policy > static_cast<std::uint8_t>(InitPolicy::fixed_sigma)) throw CheckpointError("bad init policy tag");
      rec.policy = static_cast<InitPolicy>(policy);
      rec.layer = r.u64();
      rec.bound = r.f64();
      rec.stddev = r.f64();
      b.params.add(name, r.tensor(), rec);
    } else {
      throw CheckpointError("bad parameter kind tag " + std::to_string(kind));
    }
  }
  if (r.u8()) {
    OptimizerState s;
    s.step = r.u64();
    for (std::uint32_t i = 0, n = r.u32(); i < n; ++i) {
      std::string name = r.str();
      s.m.emplace(name, r.tensor());
      s.v.emplace(name, r.tensor());
    }
    b.optimizer = std::move(s);
  }
  return b;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointBundle& bundle) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(os, bundle);
}

CheckpointBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(is);
}

Parameters average_checkpoints(std::span<const CheckpointBundle> bundles) {
  if (bundles.empty()) throw ParameterError("average_checkpoints: no checkpoints");
  Parameters out = bundles[0].params;
  const auto& names = out.names();
  for (std::size_t i = 1; i < bundles.size(); ++i) {
    const Parameters& p = bundles[i].params;
    if (p.names() != names) {
      throw ParameterError("average_checkpoints: checkpoint " + std::to_string(i) +
                           " has different parameter names");
    }
    for (const auto& name : names) {
      if (out.is_alias(name) != p.is_alias(name) ||
          (out.is_alias(name) && out.canonical(name) != p.canonical(name))) {
        throw ParameterError("average_checkpoints: aliasing of '" + name + "' differs");
      }
      if (!out.is_alias(name) && out.at(name).shape() != p.at(name).shape()) {
        throw ParameterError("average_checkpoints: '" + name + "' has shape " +
                             shape_str(p.at(name).shape()) + " vs " +
                             shape_str(out.at(name).shape()));
      }
    }
  }
  const double k = static_cast<double>(bundles.size());
  for (const auto& name : out.storage_names()) {
    Tensor& acc = out.at(name);
    for (std::size_t i = 1; i < bundles.size(); ++i) acc += bundles[i].params.at(name);
    acc *= 1.0 / k;
  }
  return out;
}

}  // namespace deepnmt
