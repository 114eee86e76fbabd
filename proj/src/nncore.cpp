#include "lorel/nncore.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "lorel/errors.hpp"

namespace lorel::nn {

namespace {

constexpr char kMagic[4] = {'L', 'R', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

void validate(const MLPSpec& spec) {
  if (spec.layer_sizes.size() < 2) throw ConfigError("mlp: need at least one layer");
  if (spec.activations.size() + 1 != spec.layer_sizes.size())
    throw ConfigError("mlp: one activation per weight layer required");
  for (int s : spec.layer_sizes)
    if (s < 1) throw ConfigError("mlp: layer sizes must be positive");
  if (spec.dropout_rate < 0.0 || spec.dropout_rate >= 1.0)
    throw ConfigError("mlp: dropout rate must be in [0,1)");
  for (std::size_t i = 0; i + 1 < spec.activations.size(); ++i)
    if (spec.activations[i] == Act::kSigmoid)
      throw ConfigError("mlp: sigmoid allowed only as the final activation");
}

Eigen::MatrixXd apply_act(Act act, const Eigen::MatrixXd& pre) {
  switch (act) {
    case Act::kLinear:  return pre;
    case Act::kRelu:    return pre.cwiseMax(0.0);
    case Act::kSigmoid: return ((-pre.array()).exp() + 1.0).inverse().matrix();
  }
  throw std::logic_error("apply_act: bad tag");
}

}  // namespace

MLPSpec mlp_spec(const std::vector<int>& sizes, Act output, double dropout_rate) {
  if (sizes.size() < 2) throw ConfigError("mlp: need at least one layer");
  MLPSpec spec;
  spec.layer_sizes = sizes;
  spec.activations.assign(sizes.size() - 1, Act::kRelu);
  spec.activations.back() = output;
  spec.dropout_rate = dropout_rate;
  validate(spec);
  return spec;
}

MLPParams init_params(const MLPSpec& spec, Rng& rng) {
  validate(spec);
  MLPParams p;
  p.spec = spec;
  for (int l = 0; l < spec.num_layers(); ++l) {
    int in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    double bound = std::sqrt(6.0 / in);
    Eigen::MatrixXd W(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) W(i, j) = rng.uniform(-bound, bound);
    p.W.push_back(std::move(W));
    p.b.push_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

Eigen::MatrixXd forward(const MLPParams& p, const Eigen::MatrixXd& x, bool train_mode, Rng* rng,
                        ForwardCache* cache) {
  if (x.cols() != p.spec.layer_sizes.front())
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " features, expected " +
                     std::to_string(p.spec.layer_sizes.front()));
  bool dropout_on = train_mode && p.spec.dropout_rate > 0.0;
  if (dropout_on && rng == nullptr) throw ConfigError("forward: dropout requires an rng");

  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
    cache->dropout.clear();
  }

  int n_layers = p.spec.num_layers();
  Eigen::MatrixXd h = x;
  for (int l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd pre = (h * p.W[l].transpose()).rowwise() + p.b[l].transpose();
    Eigen::MatrixXd post = apply_act(p.spec.activations[l], pre);
    if (dropout_on && l + 1 < n_layers) {
      double rate = p.spec.dropout_rate;
      Eigen::MatrixXd mask(post.rows(), post.cols());
      for (Eigen::Index i = 0; i < mask.rows(); ++i)
        for (Eigen::Index j = 0; j < mask.cols(); ++j)
          mask(i, j) = rng->uniform() >= rate ? 1.0 / (1.0 - rate) : 0.0;
      post = post.cwiseProduct(mask);
      if (cache) cache->dropout.push_back(std::move(mask));
    } else if (cache) {
      cache->dropout.emplace_back();
    }
    if (cache) {
      cache->pre.push_back(pre);
      cache->post.push_back(post);
    }
    h = std::move(post);
  }
  return h;
}

Grads backward(const MLPParams& p, const ForwardCache& cache, const Eigen::MatrixXd& dout,
               bool dout_wrt_final_preact, Eigen::MatrixXd* dx) {
  int n_layers = p.spec.num_layers();
  if (static_cast<int>(cache.pre.size()) != n_layers)
    throw ShapeError("backward: cache does not match the network");

  Grads g;
  g.dW.resize(n_layers);
  g.db.resize(n_layers);

  Eigen::MatrixXd delta;  // dL/d(pre-activation of layer l)
  for (int l = n_layers - 1; l >= 0; --l) {
    if (l == n_layers - 1) {
      if (dout_wrt_final_preact) {
        delta = dout;
      } else {
        switch (p.spec.activations[l]) {
          case Act::kLinear:
            delta = dout;
            break;
          case Act::kRelu:
            delta = dout.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
            break;
          case Act::kSigmoid: {
            Eigen::ArrayXXd s = cache.post[l].array();
            delta = dout.cwiseProduct((s * (1.0 - s)).matrix());
            break;
          }
        }
      }
    } else {
      Eigen::MatrixXd dpost = delta * p.W[l + 1];
      if (cache.dropout[l].size() > 0) dpost = dpost.cwiseProduct(cache.dropout[l]);
      switch (p.spec.activations[l]) {
        case Act::kLinear:
          delta = std::move(dpost);
          break;
        case Act::kRelu:
          delta = dpost.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
          break;
        case Act::kSigmoid:
          throw std::logic_error("backward: hidden sigmoid is rejected at construction");
      }
    }
    const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.post[l - 1];
    g.dW[l] = delta.transpose() * below;
    g.db[l] = delta.colwise().sum();
  }
  if (dx) *dx = delta * p.W[0];
  return g;
}

AdamState init_adam(const MLPParams& p, double learning_rate) {
  AdamState st;
  st.learning_rate = learning_rate;
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    st.mW.push_back(Eigen::MatrixXd::Zero(p.W[l].rows(), p.W[l].cols()));
    st.vW.push_back(Eigen::MatrixXd::Zero(p.W[l].rows(), p.W[l].cols()));
    st.mb.push_back(Eigen::VectorXd::Zero(p.b[l].size()));
    st.vb.push_back(Eigen::VectorXd::Zero(p.b[l].size()));
  }
  return st;
}

void adam_step(MLPParams& p, const Grads& g, AdamState& st) {
  if (g.dW.size() != p.W.size()) throw ShapeError("adam_step: gradient/param layer mismatch");
  st.step += 1;
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    st.mW[l] = st.beta1 * st.mW[l] + (1.0 - st.beta1) * g.dW[l];
    st.vW[l] = st.beta2 * st.vW[l] + (1.0 - st.beta2) * g.dW[l].cwiseProduct(g.dW[l]);
    p.W[l].array() -=
        st.learning_rate * (st.mW[l].array() / bc1) / ((st.vW[l].array() / bc2).sqrt() + st.eps);
    st.mb[l] = st.beta1 * st.mb[l] + (1.0 - st.beta1) * g.db[l];
    st.vb[l] = st.beta2 * st.vb[l] + (1.0 - st.beta2) * g.db[l].cwiseProduct(g.db[l]);
    p.b[l].array() -=
        st.learning_rate * (st.mb[l].array() / bc1) / ((st.vb[l].array() / bc2).sqrt() + st.eps);
  }
}

namespace {

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& f) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!f) throw CheckpointError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_params(const MLPParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
  f.write(kMagic, 4);
  put(f, kVersion);
  put(f, static_cast<std::uint32_t>(p.spec.layer_sizes.size()));
  for (int s : p.spec.layer_sizes) put(f, static_cast<std::int32_t>(s));
  for (Act a : p.spec.activations) put(f, static_cast<std::uint8_t>(a));
  put(f, p.spec.dropout_rate);
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    f.write(reinterpret_cast<const char*>(p.W[l].data()),
            static_cast<std::streamsize>(sizeof(double) * p.W[l].size()));
    f.write(reinterpret_cast<const char*>(p.b[l].data()),
            static_cast<std::streamsize>(sizeof(double) * p.b[l].size()));
  }
  if (!f) throw CheckpointError("checkpoint: write failed on " + path);
}

MLPParams load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("checkpoint: bad magic in " + path);
  auto version = get<std::uint32_t>(f);
  if (version != kVersion)
    throw CheckpointError("checkpoint: version " + std::to_string(version) + ", expected " +
                          std::to_string(kVersion));
  auto n_sizes = get<std::uint32_t>(f);
  if (n_sizes < 2 || n_sizes > 64) throw CheckpointError("checkpoint: implausible layer count");
  MLPSpec spec;
  for (std::uint32_t i = 0; i < n_sizes; ++i) spec.layer_sizes.push_back(get<std::int32_t>(f));
  for (std::uint32_t i = 0; i + 1 < n_sizes; ++i) {
    auto tag = get<std::uint8_t>(f);
    if (tag > 2) throw CheckpointError("checkpoint: bad activation tag");
    spec.activations.push_back(static_cast<Act>(tag));
  }
  spec.dropout_rate = get<double>(f);
  validate(spec);

  MLPParams p;
  p.spec = spec;
  for (int l = 0; l < spec.num_layers(); ++l) {
    int in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    Eigen::MatrixXd W(out, in);
    f.read(reinterpret_cast<char*>(W.data()), static_cast<std::streamsize>(sizeof(double) * W.size()));
    Eigen::VectorXd b(out);
    f.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(sizeof(double) * b.size()));
    if (!f) throw CheckpointError("checkpoint: truncated matrices in " + path);
    p.W.push_back(std::move(W));
    p.b.push_back(std::move(b));
  }
  return p;
}

double gradient_check(const MLPSpec& spec, int batch, std::uint64_t seed, bool train_mode,
                      int max_probes) {
  Rng rng(seed);
  MLPParams p = init_params(spec, rng);
  int in = spec.layer_sizes.front(), out = spec.layer_sizes.back();

  Eigen::MatrixXd x(batch, in);
  for (int i = 0; i < batch; ++i)
    for (int j = 0; j < in; ++j) x(i, j) = rng.normal();
  Eigen::MatrixXd c(batch, out);
  for (int i = 0; i < batch; ++i)
    for (int j = 0; j < out; ++j) c(i, j) = rng.normal();

  // All loss evaluations replay the same dropout masks by reusing this seed.
  std::uint64_t mask_seed = rng.next_u64();
  auto loss = [&](const MLPParams& params) {
    Rng mask_rng(mask_seed);
    return forward(params, x, train_mode, &mask_rng).cwiseProduct(c).sum();
  };

  Rng mask_rng(mask_seed);
  ForwardCache cache;
  forward(p, x, train_mode, &mask_rng, &cache);
  Grads g = backward(p, cache, c);

  std::vector<std::pair<double*, double>> probes;  // (parameter, analytic grad)
  for (int l = 0; l < spec.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < p.W[l].rows(); ++i)
      for (Eigen::Index j = 0; j < p.W[l].cols(); ++j)
        probes.emplace_back(&p.W[l](i, j), g.dW[l](i, j));
    for (Eigen::Index i = 0; i < p.b[l].size(); ++i)
      probes.emplace_back(&p.b[l](i), g.db[l](i));
  }
  std::size_t stride = 1;
  if (max_probes > 0 && probes.size() > static_cast<std::size_t>(max_probes))
    stride = (probes.size() + max_probes - 1) / max_probes;

  const double h = 1e-5;
  double max_rel = 0.0;
  for (std::size_t k = 0; k < probes.size(); k += stride) {
    double* param = probes[k].first;
    double analytic = probes[k].second;
    double orig = *param;
    *param = orig + h;
    double up = loss(p);
    *param = orig - h;
    double down = loss(p);
    *param = orig;
    double fd = (up - down) / (2.0 * h);
    double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

}  // namespace lorel::nn
