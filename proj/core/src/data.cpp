// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/data.hpp"
#include "earlydrop/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "binary_io.hpp"
#include "earlydrop/error.hpp"
#include "earlydrop/rng.hpp"

namespace earlydrop {

const char *to_string(DatasetKind k) {
  return k == DatasetKind::gaussian_clusters ? "gaussian_clusters" : "teacher_mlp";
}

DatasetKind parse_dataset_kind(const std::string &s) {
  if (s == "gaussian_clusters") return DatasetKind::gaussian_clusters;
  if (s == "teacher_mlp") return DatasetKind::teacher_mlp;
  throw ValidationError("unknown dataset kind '" + s + "'");
}

void DatasetSpec::validate() const {
  if (n_classes < 2) throw ValidationError("dataset needs at least 2 classes");
  if (input_dim == 0) throw ValidationError("dataset input_dim must be positive");
  if (n_train < n_classes) {
    throw ValidationError("n_train (" + std::to_string(n_train) +
                          ") is smaller than the number of classes (" +
                          std::to_string(n_classes) + ")");
  }
  if (n_test == 0) throw ValidationError("n_test must be positive");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ValidationError("label noise must lie in [0, 1]");
  if (!(cluster_std >= 0.0)) throw ValidationError("cluster_std must be non-negative");
  if (kind == DatasetKind::teacher_mlp && (teacher_depth == 0 || teacher_hidden == 0))
    throw ValidationError("teacher needs positive depth and width");
}

namespace {

Rng dataset_rng(const DatasetSpec &s, std::uint64_t part) {
  return Rng(s.seed, stream_id({static_cast<std::uint64_t>(StreamTag::dataset), part}));
}

std::vector<std::uint32_t> teacher_labels(const DatasetSpec &s, const Tensor &x) {
  Rng rng = dataset_rng(s, 2);
  const std::size_t n = x.rows();
  std::vector<double> h(x.data().begin(), x.data().end());
  std::size_t width = s.input_dim;
  auto layer = [&](std::size_t out, bool relu) {
    const double scale = std::sqrt((relu ? 2.0 : 1.0) / static_cast<double>(width));
    std::vector<double> w(width * out);
    for (double &v : w) v = rng.normal() * scale;
    std::vector<double> b(out);
    for (double &v : b) v = 0.1 * rng.normal();
    std::vector<double> y(n * out, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < width; ++p) {
        const double xv = h[i * width + p];
        for (std::size_t j = 0; j < out; ++j) y[i * out + j] += xv * w[p * out + j];
      }
      for (std::size_t j = 0; j < out; ++j) {
        double &v = y[i * out + j];
        v += b[j];
        if (relu && v < 0.0) v = 0.0;
      }
    }
    h = std::move(y);
    width = out;
  };
  for (std::size_t l = 0; l < s.teacher_depth; ++l) layer(s.teacher_hidden, true);
  layer(s.n_classes, false);

  const std::size_t c = s.n_classes;
  for (std::size_t j = 0; j < c; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += h[i * c + j];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq += (h[i * c + j] - mean) * (h[i * c + j] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      h[i * c + j] = sd > 0.0 ? (h[i * c + j] - mean) / sd : 0.0;
  }
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double *row = h.data() + i * c;
    labels[i] = static_cast<std::uint32_t>(std::max_element(row, row + c) - row);
  }
  return labels;
}

DatasetPair clean_pool(const DatasetSpec &s) {
  const std::size_t n = s.n_train + s.n_test, d = s.input_dim, c = s.n_classes;
  Tensor x({n, d}, 0.0);
  std::vector<std::uint32_t> y(n);
  Rng rng = dataset_rng(s, 1);

  if (s.kind == DatasetKind::gaussian_clusters) {
    std::vector<double> means(c * d, 0.0);
    if (d >= c) {
      const double norm = std::sqrt(static_cast<double>(c - 1) / static_cast<double>(c));
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t j = 0; j < c; ++j)
          means[k * d + j] = ((j == k ? 1.0 : 0.0) - 1.0 / static_cast<double>(c)) / norm;
    } else {
      Rng mrng = dataset_rng(s, 4);
      for (std::size_t k = 0; k < c; ++k) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          means[k * d + j] = mrng.normal();
          sq += means[k * d + j] * means[k * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) means[k * d + j] /= std::sqrt(sq);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<std::uint32_t>(i % c);
      for (std::size_t j = 0; j < d; ++j)
        x[i * d + j] = s.separation * means[y[i] * d + j] + s.cluster_std * rng.normal();
    }
  } else {
    for (double &v : x.data()) v = rng.normal();
    y = teacher_labels(s, x);
  }

  DatasetPair out;
  auto take = [&](std::size_t begin, std::size_t end) {
    Dataset ds;
    ds.n_classes = c;
    ds.inputs = Tensor({end - begin, d},
                       std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(begin * d),
                                           x.data().begin() + static_cast<std::ptrdiff_t>(end * d)));
    ds.labels.assign(y.begin() + static_cast<std::ptrdiff_t>(begin),
                     y.begin() + static_cast<std::ptrdiff_t>(end));
    return ds;
  };
  out.train = take(0, s.n_train);
  out.test = take(s.n_train, n);
  return out;
}

} // namespace

DatasetPair generate(const DatasetSpec &spec) {
  spec.validate();
  DatasetPair pair = clean_pool(spec);
  if (spec.noise > 0.0) {
    Rng rng = dataset_rng(spec, 3);
    const auto c = static_cast<std::uint32_t>(spec.n_classes);
    for (auto &label : pair.train.labels) {
      if (rng.uniform() < spec.noise) {
        label = (label + 1 + static_cast<std::uint32_t>(rng.below(c - 1))) % c;
      }
    }
  }
  std::vector<bool> seen(spec.n_classes, false);
  for (auto label : pair.train.labels) seen[label] = true;
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    if (!seen[k]) {
      throw ValidationError("class " + std::to_string(k) +
                            " is absent from the training split; change the seed or size");
    }
  }
  return pair;
}

std::size_t count_flipped_labels(const DatasetSpec &spec, const Dataset &train) {
  DatasetSpec clean = spec;
  clean.noise = 0.0;
  const DatasetPair ref = clean_pool(clean);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < train.size(); ++i) flips += ref.train.labels[i] != train.labels[i];
  return flips;
}

std::string encode_dataset(const Dataset &d) {
  detail::ByteWriter w;
  w.bytes("DDDS");
  w.u32(kDatasetVersion);
  w.u64(d.size());
  w.u64(d.input_dim());
  w.u64(d.n_classes);
  for (double v : d.inputs.data()) w.f64(v);
  for (auto label : d.labels) w.u32(label);
  return w.take();
}

Dataset decode_dataset(std::string_view bytes) {
  detail::ByteReader r(bytes, "dataset");
  if (r.bytes(4) != "DDDS") r.fail("bad magic, expected DDDS");
  const auto version = r.u32();
  if (version != kDatasetVersion) {
    r.fail("unsupported dataset version " + std::to_string(version) + ", expected " +
           std::to_string(kDatasetVersion));
  }
  const auto n = r.u64();
  const auto d = r.u64();
  const auto c = r.u64();
  if (d == 0 || c < 2) r.fail("invalid dimensions");
  if (n > r.remaining() / (8 * d + 4)) r.fail("file too short for " + std::to_string(n) + " rows");
  Dataset ds;
  ds.n_classes = c;
  std::vector<double> x(n * d);
  for (auto &v : x) v = r.f64();
  ds.inputs = Tensor({n, d}, std::move(x));
  ds.labels.resize(n);
  for (auto &label : ds.labels) {
    label = r.u32();
    if (label >= c) r.fail("label " + std::to_string(label) + " out of range");
  }
  if (r.remaining() != 0) r.fail("trailing bytes after labels");
  return ds;
}

void save_dataset(const Dataset &d, const std::string &path) {
  detail::write_file(path, encode_dataset(d));
}

Dataset load_dataset(const std::string &path) { return decode_dataset(detail::read_file(path)); }

std::string dataset_manifest(const DatasetSpec &s) {
  std::ostringstream o;
  o << "data.kind=" << to_string(s.kind) << "\n"
    << "data.n_train=" << s.n_train << "\n"
    << "data.n_test=" << s.n_test << "\n"
    << "data.input_dim=" << s.input_dim << "\n"
    << "data.n_classes=" << s.n_classes << "\n"
    << "data.noise=" << format_double(s.noise) << "\n"
    << "data.seed=" << s.seed << "\n"
    << "data.separation=" << format_double(s.separation) << "\n"
    << "data.cluster_std=" << format_double(s.cluster_std) << "\n"
    << "data.teacher_depth=" << s.teacher_depth << "\n"
    << "data.teacher_hidden=" << s.teacher_hidden << "\n"
    << "format=DDDS\n"
    << "version=" << kDatasetVersion << "\n";
  return o.str();
}

std::vector<std::uint32_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                             std::uint64_t epoch) {
  std::vector<std::uint32_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
  Rng rng(seed, stream_id({static_cast<std::uint64_t>(StreamTag::data_order), epoch}));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

std::vector<std::vector<std::uint32_t>> minibatch_indices(std::size_t n, std::size_t batch_size,
                                                          std::uint64_t seed,
                                                          std::uint64_t epoch) {
  if (batch_size < 1 || batch_size > n) {
    throw ValidationError("batch size " + std::to_string(batch_size) + " must lie in [1, " +
                          std::to_string(n) + "]");
  }
  const auto perm = epoch_permutation(n, seed, epoch);
  std::vector<std::vector<std::uint32_t>> batches;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Batch gather(const Dataset &d, std::span<const std::uint32_t> indices) {
  const std::size_t dim = d.input_dim();
  Batch b;
  b.inputs = Tensor({indices.size(), dim}, 0.0);
  b.labels.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    std::copy_n(d.inputs.data().begin() + static_cast<std::ptrdiff_t>(i * dim), dim,
                b.inputs.data().begin() + static_cast<std::ptrdiff_t>(r * dim));
    b.labels[r] = d.labels[i];
  }
  return b;
}

Batch slice(const Dataset &d, std::size_t begin, std::size_t end) {
  std::vector<std::uint32_t> idx(end - begin);
  for (std::size_t i = begin; i < end; ++i) idx[i - begin] = static_cast<std::uint32_t>(i);
  return gather(d, idx);
}

} // namespace earlydrop
