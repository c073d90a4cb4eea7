// Copyright 2026 The Sparsify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparsify/sparse.hpp"

#include <chrono>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "sparsify/pruning.hpp"

namespace sparsify {

namespace {

constexpr char kCsrMagic[4] = {'G', 'M', 'P', 'C'};
constexpr std::uint32_t kCsrVersion = 1;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename F>
double time_ns(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::nano>(t1 - t0).count();
}

// Keeps the optimizer from discarding a product nobody reads.
volatile double g_sink = 0;

}  // namespace

CsrMatrix<double> to_csr(const Tensor& weights, const SparsityMask& mask) {
  return to_csr<double>(weights.matrix(), mask);
}

long long csr_bytes(Index rows, Index nnz) { return nnz * (kValueBytes + kIndexBytes) + (rows + 1) * kIndexBytes; }

double SizeReport::encoder_ratio() const {
  return encoder_dense_bytes ? static_cast<double>(encoder_sparse_bytes) / encoder_dense_bytes : 0.0;
}

double SizeReport::total_ratio() const {
  return total_dense_bytes ? static_cast<double>(total_sparse_bytes) / total_dense_bytes : 0.0;
}

std::string SizeReport::to_csv() const {
  std::ostringstream out;
  out << "component,rows,cols,nnz,dense_bytes,sparse_bytes,ratio\n";
  for (const auto& c : components) {
    out << c.path << ',' << c.rows << ',' << c.cols << ',' << c.nnz << ',' << c.dense_bytes << ','
        << c.sparse_bytes << ',' << c.ratio() << '\n';
  }
  out << "encoder,,,," << encoder_dense_bytes << ',' << encoder_sparse_bytes << ',' << encoder_ratio() << '\n';
  out << "remainder,,,," << remainder_bytes << ',' << remainder_bytes << ",1\n";
  out << "total,,,," << total_dense_bytes << ',' << total_sparse_bytes << ',' << total_ratio() << '\n';
  return out.str();
}

SizeReport checkpoint_size_report(const Checkpoint& ck) {
  ck.check_masks();
  SizeReport rep;
  for (const auto& [path, t] : ck.params.tensors()) {
    const long long dense = kValueBytes * t.size();
    rep.total_dense_bytes += dense;
    auto it = ck.masks.find(path);
    if (it == ck.masks.end()) {
      rep.remainder_bytes += dense;
      continue;
    }
    ComponentBytes c;
    c.path = path;
    c.rows = t.rows();
    c.cols = t.cols();
    c.nnz = it->second.kept_count();
    c.dense_bytes = dense;
    c.sparse_bytes = csr_bytes(c.rows, c.nnz);
    rep.encoder_dense_bytes += c.dense_bytes;
    rep.encoder_sparse_bytes += c.sparse_bytes;
    rep.components.push_back(std::move(c));
  }
  rep.total_sparse_bytes = rep.encoder_sparse_bytes + rep.remainder_bytes;
  return rep;
}

std::string export_csr(const Checkpoint& ck) {
  ck.check_masks();
  binary::Writer w;
  w.raw(kCsrMagic, 4);
  w.put(kCsrVersion);
  w.put(static_cast<std::uint32_t>(ck.masks.size()));
  for (const auto& [path, mask] : ck.masks) {
    const auto csr = to_csr<float>(ck.params.at(path).matrix(), mask);
    w.put_string(path);
    w.put(static_cast<std::uint32_t>(csr.rows));
    w.put(static_cast<std::uint32_t>(csr.cols));
    w.put(static_cast<std::uint32_t>(csr.nnz()));
    for (auto p : csr.row_ptr) w.put(static_cast<std::uint32_t>(p));
    for (auto c : csr.col_idx) w.put(static_cast<std::uint32_t>(c));
    for (float v : csr.values) w.put(v);
  }
  const std::uint32_t sum = binary::crc(w.bytes());
  w.put(sum);
  return std::move(w.bytes());
}

std::map<std::string, CsrMatrix<float>> import_csr(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != std::string_view(kCsrMagic, 4)) {
    throw DataError("not a sparse export (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (binary::crc(body) != stored) throw DataError("sparse export checksum mismatch");
  binary::Reader r(body.substr(4), "sparse export");
  const auto version = r.get<std::uint32_t>();
  if (version != kCsrVersion) throw DataError("unsupported sparse export version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  std::map<std::string, CsrMatrix<float>> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string path = r.get_string();
    CsrMatrix<float> m;
    m.rows = r.get<std::uint32_t>();
    m.cols = r.get<std::uint32_t>();
    const auto nnz = r.get<std::uint32_t>();
    if (static_cast<Index>(nnz) > m.rows * m.cols) throw DataError(path + ": nnz exceeds shape");
    m.row_ptr.resize(static_cast<std::size_t>(m.rows + 1));
    for (auto& p : m.row_ptr) p = static_cast<std::int32_t>(r.get<std::uint32_t>());
    m.col_idx.resize(nnz);
    for (auto& c : m.col_idx) c = static_cast<std::int32_t>(r.get<std::uint32_t>());
    m.values.resize(nnz);
    for (auto& v : m.values) v = r.get<float>();
    m.validate();
    if (!out.emplace(std::move(path), std::move(m)).second) throw DataError("duplicate component in sparse export");
  }
  if (!r.done()) throw DataError("trailing bytes in sparse export");
  return out;
}

void save_csr(const Checkpoint& ck, const std::string& path) {
  const std::string bytes = export_csr(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path);
}

std::map<std::string, CsrMatrix<float>> load_csr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return import_csr(bytes);
}

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  out << "dim,sparsity,dense_ns,sparse_ns,ratio\n";
  for (const auto& r : rows) {
    out << r.dim << ',' << r.sparsity << ',' << r.dense_ns << ',' << r.sparse_ns << ',' << r.ratio << '\n';
  }
  return out.str();
}

std::string machine_description() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  std::ostringstream out;
  out << cpu << "; " << std::thread::hardware_concurrency() << " hardware threads; compiler " << __VERSION__;
  return out.str();
}

BenchReport benchmark_speedup(const BenchConfig& cfg) {
  if (cfg.repeats < 5) throw ConfigError("benchmark needs at least 5 repeats");
  if (cfg.batch < 1) throw ConfigError("benchmark batch must be positive");
  BenchReport rep;
  rep.repeats = cfg.repeats;
  rep.batch = cfg.batch;
  rep.machine = machine_description();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index dim : cfg.dims) {
    if (dim < 1) throw ConfigError("benchmark dims must be positive");
    Matrix w(dim, dim);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    Matrix x(dim, cfg.batch);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    const Tensor wt = Tensor::from_matrix(w);
    for (double s : cfg.sparsities) {
      if (!(s >= 0.0 && s < 1.0)) throw ConfigError("benchmark sparsity must lie in [0, 1)");
      const SparsityMask mask = magnitude_prune_component(wt, SparsityMask("bench", dim, dim), s);
      const Matrix wm = w.cwiseProduct(mask.as_matrix());
      const CsrMatrix<double> csr = to_csr<double>(wm, mask);
      // One untimed pass each to fault in pages.
      g_sink = g_sink + naive_dense_matmul(wm, x)(0, 0) + csr_matmul(csr, x)(0, 0);
      std::vector<double> dense_t, sparse_t;
      for (int r = 0; r < cfg.repeats; ++r) {
        dense_t.push_back(time_ns([&] { g_sink = g_sink + naive_dense_matmul(wm, x)(0, 0); }));
        sparse_t.push_back(time_ns([&] { g_sink = g_sink + csr_matmul(csr, x)(0, 0); }));
      }
      BenchRow row;
      row.dim = dim;
      row.sparsity = s;
      row.dense_ns = median(dense_t);
      row.sparse_ns = median(sparse_t);
      row.ratio = row.sparse_ns > 0 ? row.dense_ns / row.sparse_ns : 0.0;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace sparsify
