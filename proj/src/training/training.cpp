#include "retrologic/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <thread>

#include "retrologic/error.hpp"

namespace retrologic {

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::Exact: return "exact";
    case Estimator::SampledModel: return "sampled-model";
    case Estimator::SampledUniform: return "sampled-uniform";
  }
  return "exact";
}

Estimator estimator_from_string(const std::string& s) {
  if (s == "exact") return Estimator::Exact;
  if (s == "sampled-model" || s == "model") return Estimator::SampledModel;
  if (s == "sampled-uniform" || s == "uniform") return Estimator::SampledUniform;
  throw std::invalid_argument("unknown estimator '" + s + "'");
}

namespace {

const SupportIndex& truth_of(const Example& ex) {
  if (!ex.truth_index) {
    throw DataError("ground truth of " + ex.record_id + " is not in its cached support");
  }
  return *ex.truth_index;
}

Eigen::VectorXd mean_of(const ModelConfig& cfg, const EmbedderWeights& w,
                        const std::vector<GraphFeatures>& graphs) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(cfg.embed.dim);
  for (const auto& g : graphs) sum += embed(cfg.embed, w, g).graph_embedding;
  return sum / static_cast<double>(graphs.size());
}

double form(const Eigen::VectorXd& x, const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
  return a.size() == 0 ? x.dot(y) : x.dot(a * y);
}

// Scores on the fly: the energies of the whole support are not needed.
struct ProductEmbeddings {
  Eigen::VectorXd g2, g3, g5;
};

ProductEmbeddings embed_product(const GlnModel& m, const GraphFeatures& f) {
  const auto& c = m.config.embed;
  return {embed(c, m.params.g[1], f).graph_embedding, embed(c, m.params.g[2], f).graph_embedding,
          embed(c, m.params.g[4], f).graph_embedding};
}

std::size_t draw(const std::vector<double>& p, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> d(p.begin(), p.end());
  return d(rng);
}

std::size_t draw_uniform(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(rng);
}

// Embeds `graphs` with tapes; returns the mean and keeps the tapes.
struct SetForward {
  std::vector<EmbeddingTape> tapes;
  Eigen::VectorXd mean;
};

SetForward embed_set(const ModelConfig& cfg, const EmbedderWeights& w,
                     const std::vector<GraphFeatures>& graphs) {
  SetForward s;
  s.tapes.resize(graphs.size());
  s.mean = Eigen::VectorXd::Zero(cfg.embed.dim);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    s.mean += embed(cfg.embed, w, graphs[i], &s.tapes[i]).graph_embedding;
  }
  s.mean /= static_cast<double>(graphs.size());
  return s;
}

}  // namespace

ItemForward forward_item(const GlnModel& model, const Example& ex) {
  const auto& at = truth_of(ex);
  const auto& support = ex.support;
  const auto pe = embed_product(model, support.product_features);
  const auto& cfg = model.config;
  ItemForward f;
  for (const auto& c : support.centers) {
    const auto g1 = embed(cfg.embed, model.params.g[0], c.center_features).graph_embedding;
    f.v1.push_back(form(g1, model.params.bilinear[0], pe.g2));
  }
  const auto& group = support.centers[at.center].templates;
  for (const auto& t : group) {
    f.v2.push_back(form(pe.g3, model.params.bilinear[1], mean_of(cfg, model.params.g[3], t.reactant_patterns)));
  }
  for (const auto& cand : group[at.templ].candidates) {
    f.w2.push_back(form(pe.g5, model.params.bilinear[2], mean_of(cfg, model.params.g[5], cand.molecules)));
  }
  f.p_center = softmax(f.v1);
  f.p_template = softmax(f.v2);
  f.p_candidate = softmax(f.w2);
  f.loss = -(f.v1[at.center] - log_sum_exp(f.v1) + f.v2[at.templ] - log_sum_exp(f.v2) +
             f.w2[at.candidate] - log_sum_exp(f.w2));
  return f;
}

EnergyCoefficients exact_coefficients(const Example& ex, const ItemForward& f) {
  const auto& at = truth_of(ex);
  EnergyCoefficients c{f.p_center, f.p_template, f.p_candidate};
  c.center[at.center] -= 1.0;
  c.templ[at.templ] -= 1.0;
  c.candidate[at.candidate] -= 1.0;
  return c;
}

EnergyCoefficients sampled_coefficients(const Example& ex, const ItemForward& f, Estimator proposal,
                                        std::mt19937_64& rng) {
  const auto& at = truth_of(ex);
  EnergyCoefficients c;
  c.center.assign(f.p_center.size(), 0.0);
  c.templ.assign(f.p_template.size(), 0.0);
  c.candidate.assign(f.p_candidate.size(), 0.0);
  std::size_t o, t, r;
  if (proposal == Estimator::SampledUniform) {
    o = draw_uniform(c.center.size(), rng);
    t = draw_uniform(c.templ.size(), rng);
    r = draw_uniform(c.candidate.size(), rng);
  } else {
    o = draw(f.p_center, rng);
    t = draw(f.p_template, rng);
    r = draw(f.p_candidate, rng);
  }
  c.center[o] += 1.0;
  c.center[at.center] -= 1.0;
  c.templ[t] += 1.0;
  c.templ[at.templ] -= 1.0;
  c.candidate[r] += 1.0;
  c.candidate[at.candidate] -= 1.0;
  return c;
}

void backward_item(const GlnModel& model, const Example& ex, const EnergyCoefficients& coef,
                   double scale, GlnParams& grad) {
  const auto& at = truth_of(ex);
  const auto& cfg = model.config;
  const auto& ec = cfg.embed;
  const auto& p = model.params;
  const auto& support = ex.support;
  const auto& product = support.product_features;
  const int d = ec.dim;
  const bool bilinear = cfg.bilinear;

  auto any = [](const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
  };

  // Energy x^T A y with upstream c: dx = c A y, dy = c A^T x, dA = c x y^T.
  auto pair_grads = [&](int which, const Eigen::VectorXd& x, const Eigen::VectorXd& y, double c,
                        Eigen::VectorXd& dx, Eigen::VectorXd& dy) {
    const auto& a = p.bilinear[static_cast<std::size_t>(which)];
    if (bilinear) {
      dx += c * (a * y);
      dy += c * (a.transpose() * x);
      grad.bilinear[static_cast<std::size_t>(which)] += (scale * c) * x * y.transpose();
    } else {
      dx += c * y;
      dy += c * x;
    }
  };

  // v1 over all centers.
  if (any(coef.center)) {
    EmbeddingTape tape_o;
    const auto b = embed(ec, p.g[1], product, &tape_o).graph_embedding;
    Eigen::VectorXd db = Eigen::VectorXd::Zero(d);
    for (std::size_t c = 0; c < support.centers.size(); ++c) {
      if (coef.center[c] == 0.0) continue;
      EmbeddingTape tape_c;
      const auto& feats = support.centers[c].center_features;
      const auto a = embed(ec, p.g[0], feats, &tape_c).graph_embedding;
      Eigen::VectorXd da = Eigen::VectorXd::Zero(d);
      pair_grads(0, a, b, coef.center[c], da, db);
      embed_backward(ec, p.g[0], feats, tape_c, scale * da, nullptr, grad.g[0]);
    }
    embed_backward(ec, p.g[1], product, tape_o, scale * db, nullptr, grad.g[1]);
  }

  // v2 over the templates of the true center.
  const auto& group = support.centers[at.center].templates;
  if (any(coef.templ)) {
    EmbeddingTape tape_o;
    const auto b = embed(ec, p.g[2], product, &tape_o).graph_embedding;
    Eigen::VectorXd db = Eigen::VectorXd::Zero(d);
    for (std::size_t t = 0; t < group.size(); ++t) {
      if (coef.templ[t] == 0.0) continue;
      const auto& pats = group[t].reactant_patterns;
      const auto set = embed_set(cfg, p.g[3], pats);
      Eigen::VectorXd dm = Eigen::VectorXd::Zero(d);
      pair_grads(1, b, set.mean, coef.templ[t], db, dm);
      const Eigen::VectorXd each = scale * dm / static_cast<double>(pats.size());
      for (std::size_t i = 0; i < pats.size(); ++i) {
        embed_backward(ec, p.g[3], pats[i], set.tapes[i], each, nullptr, grad.g[3]);
      }
    }
    embed_backward(ec, p.g[2], product, tape_o, scale * db, nullptr, grad.g[2]);
  }

  // w2 over the candidates of the true template.
  const auto& cands = group[at.templ].candidates;
  if (any(coef.candidate)) {
    EmbeddingTape tape_o;
    const auto b = embed(ec, p.g[4], product, &tape_o).graph_embedding;
    Eigen::VectorXd db = Eigen::VectorXd::Zero(d);
    for (std::size_t r = 0; r < cands.size(); ++r) {
      if (coef.candidate[r] == 0.0) continue;
      const auto& mols = cands[r].molecules;
      const auto set = embed_set(cfg, p.g[5], mols);
      Eigen::VectorXd dm = Eigen::VectorXd::Zero(d);
      pair_grads(2, b, set.mean, coef.candidate[r], db, dm);
      const Eigen::VectorXd each = scale * dm / static_cast<double>(mols.size());
      for (std::size_t i = 0; i < mols.size(); ++i) {
        embed_backward(ec, p.g[5], mols[i], set.tapes[i], each, nullptr, grad.g[5]);
      }
    }
    embed_backward(ec, p.g[4], product, tape_o, scale * db, nullptr, grad.g[4]);
  }
}

double nll_loss(const GlnModel& model, const std::vector<const Example*>& batch) {
  if (batch.empty()) return 0.0;
  double sum = 0.0;
  for (const auto* ex : batch) sum += forward_item(model, *ex).loss;
  return sum / static_cast<double>(batch.size());
}

double nll_loss(const GlnModel& model, const std::vector<Example>& batch) {
  std::vector<const Example*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  return nll_loss(model, ptrs);
}

namespace {

// Mean loss and mean gradient over `batch`, split across `threads` workers
// in contiguous chunks and reduced in chunk order.
double batch_gradient(const GlnModel& model, const std::vector<const Example*>& batch,
                      Estimator estimator, std::mt19937_64& rng, int threads, GlnParams& grad) {
  const std::size_t n = batch.size();
  grad = GlnParams::zeros(model.config);
  if (n == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(n);
  // Per-item seeds drawn up front keep sampled runs independent of threads.
  std::vector<std::uint64_t> seeds(n);
  for (auto& s : seeds) s = rng();

  auto work = [&](std::size_t begin, std::size_t end, GlnParams& g, double& loss) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& ex = *batch[i];
      const auto f = forward_item(model, ex);
      loss += f.loss;
      if (estimator == Estimator::Exact) {
        backward_item(model, ex, exact_coefficients(ex, f), scale, g);
      } else {
        std::mt19937_64 item_rng(seeds[i]);
        backward_item(model, ex, sampled_coefficients(ex, f, estimator, item_rng), scale, g);
      }
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n == 1) {
    double loss = 0.0;
    work(0, n, grad, loss);
    return loss * scale;
  }
  const std::size_t chunks = std::min(workers, n);
  std::vector<GlnParams> partial(chunks, GlnParams::zeros(model.config));
  std::vector<double> losses(chunks, 0.0);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(chunks);
  for (std::size_t k = 0; k < chunks; ++k) {
    const std::size_t begin = n * k / chunks;
    const std::size_t end = n * (k + 1) / chunks;
    pool.emplace_back([&, k, begin, end] {
      try {
        work(begin, end, partial[k], losses[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < chunks; ++k) {
    grad.axpy(1.0, partial[k]);
    loss += losses[k];
  }
  return loss * scale;
}

}  // namespace

GlnParams grad_exact(const GlnModel& model, const std::vector<const Example*>& batch) {
  GlnParams g;
  std::mt19937_64 unused(0);
  batch_gradient(model, batch, Estimator::Exact, unused, 1, g);
  return g;
}

GlnParams grad_exact(const GlnModel& model, const std::vector<Example>& batch) {
  std::vector<const Example*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  return grad_exact(model, ptrs);
}

GlnParams grad_sampled(const GlnModel& model, const Example& ex, Estimator proposal,
                       std::mt19937_64& rng) {
  auto g = GlnParams::zeros(model.config);
  const auto f = forward_item(model, ex);
  const auto coef = proposal == Estimator::Exact ? exact_coefficients(ex, f)
                                                 : sampled_coefficients(ex, f, proposal, rng);
  backward_item(model, ex, coef, 1.0, g);
  return g;
}

double clip_global_norm(GlnParams& grad, double max_norm) {
  const double norm = std::sqrt(grad.squared_norm());
  if (norm > max_norm && norm > 0.0) grad.scale(max_norm / norm);
  return norm;
}

Optimizer::Optimizer(const TrainConfig& cfg, const GlnParams& like) : cfg_(cfg), m_(like), v_(like) {
  m_.scale(0.0);
  v_.scale(0.0);
}

void Optimizer::step(GlnParams& params, const GlnParams& grad) {
  ++t_;
  auto ps = params.tensors();
  const auto gs = grad.tensors();
  if (cfg_.optimizer == OptimizerKind::Sgd) {
    for (std::size_t k = 0; k < ps.size(); ++k) *ps[k].second -= cfg_.learning_rate * *gs[k].second;
    return;
  }
  auto ms = m_.tensors();
  auto vs = v_.tensors();
  const double b1 = cfg_.adam_beta1;
  const double b2 = cfg_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& m = *ms[k].second;
    auto& v = *vs[k].second;
    const auto& g = *gs[k].second;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const Eigen::MatrixXd update =
        ((m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.adam_eps)).matrix();
    *ps[k].second -= cfg_.learning_rate * update;
  }
}

std::string to_json_line(const MetricsRecord& r) {
  nlohmann::json j = {{"update", r.update}, {"epoch", r.epoch}, {"train_loss", r.train_loss},
                      {"seconds", r.seconds}};
  if (r.train_top1) j["train_top1"] = *r.train_top1;
  if (r.val_loss) j["val_loss"] = *r.val_loss;
  if (r.val_top1) j["val_top1"] = *r.val_top1;
  return j.dump();
}

TrainResult train(GlnModel model, const std::vector<Example>& train_set,
                  const std::vector<Example>* val_set, const TrainConfig& cfg,
                  const std::function<void(const MetricsRecord&)>& on_metrics) {
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  TrainResult result;
  std::vector<const Example*> usable;
  for (const auto& ex : train_set) {
    if (ex.truth_index) {
      usable.push_back(&ex);
    } else {
      ++result.skipped_examples;
    }
  }
  std::vector<const Example*> val_usable;
  if (val_set) {
    for (const auto& ex : *val_set) {
      if (ex.truth_index) val_usable.push_back(&ex);
    }
  }

  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(cfg.seed);
  Optimizer opt(cfg, model.params);
  long long update = 0;
  bool have_best = false;
  double best_top1 = -1.0;
  double best_loss = 0.0;

  auto top1 = [&](const std::vector<Example>& set) {
    return evaluate(set, model, {1}, cfg.beam).accuracy[0];
  };
  auto record = [&](int epoch) {
    MetricsRecord r;
    r.update = update;
    r.epoch = epoch;
    r.train_loss = nll_loss(model, usable);
    if (!std::isfinite(r.train_loss)) throw NumericAbort("non-finite training loss", update);
    r.train_top1 = top1(train_set);
    if (val_set) {
      r.val_loss = nll_loss(model, val_usable);
      r.val_top1 = top1(*val_set);
      if (!have_best || *r.val_top1 > best_top1 ||
          (*r.val_top1 == best_top1 && *r.val_loss < best_loss)) {
        have_best = true;
        best_top1 = *r.val_top1;
        best_loss = *r.val_loss;
        result.best_model = model;
      }
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(r);
    if (on_metrics) on_metrics(r);
  };

  record(0);
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);
  int epoch = 0;
  while (update < cfg.max_updates && (cfg.max_epochs == 0 || epoch < cfg.max_epochs) &&
         !usable.empty()) {
    ++epoch;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size() && update < cfg.max_updates;
         begin += cfg.batch_size) {
      std::vector<const Example*> batch;
      for (std::size_t i = begin; i < std::min(order.size(), begin + cfg.batch_size); ++i) {
        batch.push_back(usable[order[i]]);
      }
      GlnParams grad;
      const double loss = batch_gradient(model, batch, cfg.estimator, rng, cfg.threads, grad);
      if (!std::isfinite(loss) || !grad.all_finite()) {
        throw NumericAbort("non-finite loss or gradient", update);
      }
      clip_global_norm(grad, cfg.grad_clip);
      opt.step(model.params, grad);
      ++update;
      if (!model.params.all_finite()) throw NumericAbort("non-finite parameters", update);
    }
    if (cfg.eval_every > 0 && epoch % cfg.eval_every == 0) record(epoch);
  }
  if (result.metrics.back().update != update) record(epoch);
  result.final_model = model;
  if (!have_best) result.best_model = model;
  return result;
}

}  // namespace retrologic
