#include "transsent/nn/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "transsent/errors.hpp"

namespace transsent::nn {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

struct HashingWriter {
  std::ostream& os;
  std::uint64_t hash = kFnvOffset;

  void write(const void* data, std::size_t len) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= p[i];
      hash *= kFnvPrime;
    }
  }
  void u32(std::uint32_t v) { write(&v, 4); }
  void u64(std::uint64_t v) { write(&v, 8); }
};

struct HashingReader {
  std::istream& is;
  const std::string& path;
  std::uint64_t hash = kFnvOffset;

  void read(void* data, std::size_t len) {
    is.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (is.gcount() != static_cast<std::streamsize>(len))
      throw DataError("corrupt checkpoint (truncated): " + path);
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= p[i];
      hash *= kFnvPrime;
    }
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, 8);
    return v;
  }
};

}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Matrix*>>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write file: " + path);
  os.write(kMagic, 4);
  HashingWriter w{os};
  w.u32(kVersion);
  w.u64(tensors.size());
  for (const auto& [name, m] : tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.write(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(m->rows()));
    w.u32(static_cast<std::uint32_t>(m->cols()));
    w.write(m->data(), m->size() * sizeof(double));
  }
  const std::uint64_t checksum = w.hash;
  os.write(reinterpret_cast<const char*>(&checksum), 8);
  if (!os) throw DataError("write failed: " + path);
}

std::map<std::string, Matrix> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("corrupt checkpoint (bad magic): " + path);
  HashingReader r{is, path};
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    std::ostringstream msg;
    msg << "checkpoint version mismatch in " << path << ": found " << version << ", expected "
        << kVersion;
    throw DataError(msg.str());
  }
  const std::uint64_t count = r.u64();
  std::map<std::string, Matrix> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw DataError("corrupt checkpoint (bad name length): " + path);
    std::string name(name_len, '\0');
    r.read(name.data(), name_len);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 32))
      throw DataError("corrupt checkpoint (bad shape): " + path);
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    r.read(m.data(), m.size() * sizeof(double));
    out.emplace(std::move(name), std::move(m));
  }
  const std::uint64_t expected = r.hash;
  std::uint64_t checksum;
  is.read(reinterpret_cast<char*>(&checksum), 8);
  if (is.gcount() != 8 || checksum != expected)
    throw DataError("corrupt checkpoint (checksum mismatch): " + path);
  return out;
}

void save_param_store(const std::string& path, const ParamStore& store,
                      bool with_optimizer_state, std::int64_t adam_t) {
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  Matrix t_mat(1, 1, static_cast<double>(adam_t));
  for (const Parameter& p : store) tensors.emplace_back(p.name, &p.value);
  if (with_optimizer_state) {
    for (const Parameter& p : store) {
      tensors.emplace_back("adam.m." + p.name, &p.adam_m);
      tensors.emplace_back("adam.v." + p.name, &p.adam_v);
    }
    tensors.emplace_back("adam.t", &t_mat);
  }
  save_tensors(path, tensors);
}

std::int64_t load_param_store(const std::string& path, ParamStore& store,
                              bool with_optimizer_state) {
  auto tensors = load_tensors(path);
  auto take = [&](const std::string& name, Matrix& dst) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint " + path + " is missing tensor " + name);
    if (!it->second.same_shape(dst)) {
      std::ostringstream msg;
      msg << "checkpoint tensor " << name << " has shape " << it->second.rows() << "x"
          << it->second.cols() << ", expected " << dst.rows() << "x" << dst.cols();
      throw DataError(msg.str());
    }
    dst = std::move(it->second);
  };
  for (Parameter& p : store) take(p.name, p.value);
  std::int64_t adam_t = 0;
  if (with_optimizer_state) {
    for (Parameter& p : store) {
      take("adam.m." + p.name, p.adam_m);
      take("adam.v." + p.name, p.adam_v);
    }
    auto it = tensors.find("adam.t");
    if (it == tensors.end()) throw DataError("checkpoint " + path + " is missing tensor adam.t");
    adam_t = static_cast<std::int64_t>(it->second.at(0, 0));
  }
  return adam_t;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open file: " + path);
  std::uint64_t h = kFnvOffset;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= kFnvPrime;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

}  // namespace transsent::nn
