#include "rfkg/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rfkg/error.hpp"
#include "rfkg/random.hpp"

namespace rfkg {

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::kAttention: return "attn_proj";
    case ParamGroup::kRelationMlp: return "mlp_kg";
    case ParamGroup::kRelationEmbedding: return "rel_embed";
    case ParamGroup::kHopHead: return "mlp_t";
  }
  return "?";
}

// --- parameters --------------------------------------------------------------

ReasonerParams ReasonerParams::zeros(std::size_t dim, std::size_t num_relations, std::size_t steps) {
  if (dim == 0 || num_relations == 0 || steps == 0)
    throw ConfigError("reasoner shape must be positive (d, m, T)");
  ReasonerParams p;
  p.dim = dim;
  p.num_relations = num_relations;
  p.steps = steps;
  p.attn_proj.assign(steps, Dense(dim, 2 * dim));
  p.kg_hidden = Dense(dim, dim);
  p.kg_out = Dense(num_relations, dim);
  p.rel_embed = Matrix(num_relations, dim);
  p.hop_head = Dense(steps, dim + num_relations);
  return p;
}

ReasonerParams ReasonerParams::random(std::size_t dim, std::size_t num_relations, std::size_t steps,
                                      std::uint64_t seed) {
  auto p = zeros(dim, num_relations, steps);
  Rng rng(seed);
  auto glorot = [&](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (auto& v : w.data) v = rng.uniform(-limit, limit);
  };
  for (auto& a : p.attn_proj) glorot(a.weight);
  glorot(p.kg_hidden.weight);
  glorot(p.kg_out.weight);
  for (auto& v : p.rel_embed.data) v = 0.5 * rng.normal();
  glorot(p.hop_head.weight);
  return p;
}

void ReasonerParams::for_each_block(const std::function<void(ParamGroup, std::span<double>)>& fn) {
  for (auto& a : attn_proj) {
    fn(ParamGroup::kAttention, a.weight.data);
    fn(ParamGroup::kAttention, a.bias);
  }
  fn(ParamGroup::kRelationMlp, kg_hidden.weight.data);
  fn(ParamGroup::kRelationMlp, kg_hidden.bias);
  fn(ParamGroup::kRelationMlp, kg_out.weight.data);
  fn(ParamGroup::kRelationMlp, kg_out.bias);
  fn(ParamGroup::kRelationEmbedding, rel_embed.data);
  fn(ParamGroup::kHopHead, hop_head.weight.data);
  fn(ParamGroup::kHopHead, hop_head.bias);
}

void ReasonerParams::for_each_block(
    const std::function<void(ParamGroup, std::span<const double>)>& fn) const {
  const_cast<ReasonerParams*>(this)->for_each_block(
      [&](ParamGroup g, std::span<double> block) { fn(g, block); });
}

std::size_t ReasonerParams::size() const {
  std::size_t total = 0;
  for_each_block([&](ParamGroup, std::span<const double> b) { total += b.size(); });
  return total;
}

bool ReasonerParams::all_finite() const {
  bool ok = true;
  for_each_block([&](ParamGroup, std::span<const double> b) {
    for (double v : b) ok = ok && std::isfinite(v);
  });
  return ok;
}

void ReasonerParams::check_shape(std::size_t d, std::size_t m, std::size_t t) const {
  if (dim != d || num_relations != m || steps != t)
    throw ConfigError("parameter shape (d=" + std::to_string(dim) + ", m=" +
                      std::to_string(num_relations) + ", T=" + std::to_string(steps) +
                      ") does not match (d=" + std::to_string(d) + ", m=" + std::to_string(m) +
                      ", T=" + std::to_string(t) + ")");
}

void round_to_float32(ReasonerParams& params) {
  params.for_each_block([](ParamGroup, std::span<double> b) {
    for (auto& v : b) v = static_cast<double>(static_cast<float>(v));
  });
}

std::size_t RelationMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

// --- forward pieces ------------------------------------------------------------

AttentionResult step_attention(const QuestionEncoding& enc, std::span<const double> rel_ctx,
                               std::size_t step, const ReasonerParams& params) {
  const std::size_t d = params.dim;
  if (step < 1 || step > params.steps)
    throw Error("attention step " + std::to_string(step) + " outside 1.." +
                std::to_string(params.steps));
  if (enc.dim() != d || enc.hidden.cols != d || rel_ctx.size() != d)
    throw Error("step_attention: dimension mismatch");
  if (enc.length() == 0) throw Error("step_attention: empty question encoding");

  Vector input(2 * d);
  std::copy(enc.pooled.begin(), enc.pooled.end(), input.begin());
  std::copy(rel_ctx.begin(), rel_ctx.end(), input.begin() + static_cast<std::ptrdiff_t>(d));

  AttentionResult out;
  const auto& proj = params.attn_proj[step - 1];
  out.query.resize(d);
  affine(proj.weight, proj.bias, input, out.query);

  out.attn.resize(enc.length());
  for (std::size_t i = 0; i < enc.length(); ++i) out.attn[i] = dot(out.query, enc.hidden.row(i));
  softmax_inplace(out.attn);

  out.q_step.assign(d, 0.0);
  for (std::size_t i = 0; i < enc.length(); ++i) {
    auto h = enc.hidden.row(i);
    for (std::size_t k = 0; k < d; ++k) out.q_step[k] += out.attn[i] * h[k];
  }
  return out;
}

RelationScoring relation_scores(std::span<const double> q_step, const ReasonerParams& params) {
  if (q_step.size() != params.dim) throw Error("relation_scores: dimension mismatch");
  RelationScoring out;
  out.hidden.resize(params.dim);
  affine(params.kg_hidden.weight, params.kg_hidden.bias, q_step, out.hidden);
  for (auto& v : out.hidden) v = std::tanh(v);
  out.scores.resize(params.num_relations);
  affine(params.kg_out.weight, params.kg_out.bias, out.hidden, out.scores);
  for (auto& v : out.scores) v = sigmoid(v);
  return out;
}

MaskedStep masked_step(const EntityStateVector& prev, std::span<const double> raw_scores,
                       const KnowledgeGraph& kg, const ReasonerConfig& cfg) {
  const std::size_t m = raw_scores.size();
  if (m != kg.num_relations()) throw Error("masked_step: score vector length != relation count");
  MaskedStep out;
  out.step_mask.assign(m, 0);
  for (const auto& [subject, sub_p] : prev.entries()) {
    for (auto j : kg.outgoing(subject)) {
      const auto& t = kg.triple(j);
      const double rel_p = raw_scores[t.relation];
      const double obj_p = sub_p * rel_p;
      out.active.push_back({j, sub_p, rel_p, obj_p});
      if (obj_p > 0.0) out.step_mask[t.relation] = 1;
    }
  }
  out.filtered_scores.resize(m);
  for (std::size_t k = 0; k < m; ++k)
    out.filtered_scores[k] = cfg.use_mask ? raw_scores[k] * out.step_mask[k] : raw_scores[k];
  return out;
}

Propagation propagate_detailed(const EntityStateVector& prev, std::span<const double> scores,
                               const KnowledgeGraph& kg, bool clamp) {
  if (scores.size() != kg.num_relations()) throw Error("propagate: score vector length mismatch");
  std::unordered_map<EntityId, double> sums;
  std::vector<EntityId> order;
  for (const auto& [subject, mass] : prev.entries()) {
    for (auto j : kg.outgoing(subject)) {
      const auto& t = kg.triple(j);
      auto [it, inserted] = sums.try_emplace(t.object, 0.0);
      if (inserted) order.push_back(t.object);
      it->second += mass * scores[t.relation];
    }
  }
  std::sort(order.begin(), order.end());
  Propagation out;
  std::vector<EntityStateVector::Entry> entries;
  out.pre_clamp.reserve(order.size());
  for (auto id : order) {
    const double pre = sums[id];
    out.pre_clamp.emplace_back(id, pre);
    const double v = clamp ? std::clamp(pre, 0.0, 1.0) : pre;
    if (v > 0.0) entries.emplace_back(id, v);
  }
  out.state = EntityStateVector::from_entries(std::move(entries));
  return out;
}

Vector relation_context(std::span<const double> filtered_scores, const ReasonerParams& params) {
  if (filtered_scores.size() != params.num_relations)
    throw Error("relation_context: score vector length mismatch");
  Vector ctx(params.dim, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < params.num_relations; ++k) {
    const double w = filtered_scores[k];
    if (w == 0.0) continue;
    total += w;
    auto e = params.rel_embed.row(k);
    for (std::size_t i = 0; i < params.dim; ++i) ctx[i] += w * e[i];
  }
  const double denom = std::max(total, kRelationContextEpsilon);
  for (auto& v : ctx) v /= denom;
  return ctx;
}

HopDistribution select_hops(std::span<const double> pooled_q, const RelationMask& mask,
                            const ReasonerParams& params) {
  if (pooled_q.size() != params.dim || mask.bits.size() != params.num_relations)
    throw Error("select_hops: input length mismatch");
  Vector input(params.dim + params.num_relations);
  std::copy(pooled_q.begin(), pooled_q.end(), input.begin());
  for (std::size_t k = 0; k < params.num_relations; ++k)
    input[params.dim + k] = mask.bits[k] ? 1.0 : 0.0;
  HopDistribution out;
  out.logits.resize(params.steps);
  affine(params.hop_head.weight, params.hop_head.bias, input, out.logits);
  out.c = out.logits;
  softmax_inplace(out.c);
  std::size_t best = 0;
  for (std::size_t t = 1; t < out.c.size(); ++t)
    if (out.c[t] > out.c[best]) best = t;
  out.hops = static_cast<int>(best) + 1;
  return out;
}

ReasoningTrace forward(const QuestionEncoding& enc, std::span<const EntityId> topics,
                       const KnowledgeGraph& kg, const ReasonerParams& params,
                       const ReasonerConfig& cfg) {
  params.check_shape(enc.dim(), kg.num_relations(), params.steps);
  ReasoningTrace trace;
  trace.initial_state = one_hot(topics, kg.num_entities());
  trace.mask.bits.assign(params.num_relations, 0);

  Vector rel_ctx(params.dim, 0.0);
  const EntityStateVector* prev = &trace.initial_state;
  trace.steps.reserve(params.steps);
  for (std::size_t t = 1; t <= params.steps; ++t) {
    StepTrace step;
    step.rel_ctx_in = rel_ctx;
    step.attention = step_attention(enc, rel_ctx, t, params);
    step.scoring = relation_scores(step.attention.q_step, params);
    step.masked = masked_step(*prev, step.scoring.scores, kg, cfg);
    auto prop = propagate_detailed(*prev, step.masked.filtered_scores, kg, cfg.clamp);
    step.entity_state = std::move(prop.state);
    step.pre_clamp = std::move(prop.pre_clamp);
    step.rel_ctx_out = relation_context(step.masked.filtered_scores, params);
    if (cfg.use_mask)
      for (std::size_t k = 0; k < params.num_relations; ++k)
        if (step.masked.filtered_scores[k] > cfg.mask_threshold) trace.mask.bits[k] = 1;
    rel_ctx = step.rel_ctx_out;
    trace.steps.push_back(std::move(step));
    prev = &trace.steps.back().entity_state;
  }

  trace.hop = select_hops(enc.pooled, trace.mask, params);

  std::unordered_map<EntityId, double> mix;
  std::vector<EntityId> order;
  for (std::size_t t = 0; t < params.steps; ++t) {
    const double ct = trace.hop.c[t];
    for (const auto& [id, score] : trace.steps[t].entity_state.entries()) {
      auto [it, inserted] = mix.try_emplace(id, 0.0);
      if (inserted) order.push_back(id);
      it->second += ct * score;
    }
  }
  std::vector<EntityStateVector::Entry> entries;
  entries.reserve(order.size());
  for (auto id : order) entries.emplace_back(id, mix[id]);
  trace.final_state = EntityStateVector::from_entries(std::move(entries));
  return trace;
}

double loss(const EntityStateVector& final_state, const AnswerVector& answer) {
  double total = 0.0;
  for (const auto& [id, score] : final_state.entries()) {
    const double target = answer.contains(id) ? 1.0 : 0.0;
    total += (score - target) * (score - target);
  }
  for (auto id : answer.gold())
    if (final_state[id] == 0.0) total += 1.0;
  return total;
}

// --- reverse pass --------------------------------------------------------------

namespace {

void add_outer(Matrix& g, std::span<const double> left, std::span<const double> right) {
  for (std::size_t r = 0; r < g.rows; ++r) {
    const double l = left[r];
    if (l == 0.0) continue;
    auto row = g.row(r);
    for (std::size_t c = 0; c < g.cols; ++c) row[c] += l * right[c];
  }
}

// out = W^T v
void transpose_times(const Matrix& w, std::span<const double> v, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double s = v[r];
    if (s == 0.0) continue;
    auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols; ++c) out[c] += s * row[c];
  }
}

}  // namespace

double backward(const ReasoningTrace& trace, const QuestionEncoding& enc, const KnowledgeGraph& kg,
                const ReasonerParams& params, const AnswerVector& answer,
                const ReasonerConfig& cfg, ReasonerParams& grads) {
  const std::size_t d = params.dim, m = params.num_relations, steps = params.steps;
  grads.check_shape(d, m, steps);

  // dL/d(final score) over every coordinate that can carry gradient.
  std::unordered_map<EntityId, double> g_final;
  for (const auto& [id, score] : trace.final_state.entries())
    g_final[id] = 2.0 * (score - (answer.contains(id) ? 1.0 : 0.0));
  for (auto id : answer.gold())
    if (trace.final_state[id] == 0.0) g_final[id] = -2.0;
  auto g_final_at = [&](EntityId id) {
    auto it = g_final.find(id);
    return it == g_final.end() ? 0.0 : it->second;
  };

  // Hop head.
  const auto& c = trace.hop.c;
  Vector g_c(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t)
    for (const auto& [id, score] : trace.steps[t].entity_state.entries())
      g_c[t] += g_final_at(id) * score;
  double c_dot = 0.0;
  for (std::size_t t = 0; t < steps; ++t) c_dot += c[t] * g_c[t];
  Vector g_logits(steps);
  for (std::size_t t = 0; t < steps; ++t) g_logits[t] = c[t] * (g_c[t] - c_dot);
  {
    Vector hop_input(d + m, 0.0);
    std::copy(enc.pooled.begin(), enc.pooled.end(), hop_input.begin());
    for (std::size_t k = 0; k < m; ++k) hop_input[d + k] = trace.mask.bits[k] ? 1.0 : 0.0;
    add_outer(grads.hop_head.weight, g_logits, hop_input);
    for (std::size_t t = 0; t < steps; ++t) grads.hop_head.bias[t] += g_logits[t];
  }

  // Steps in reverse. g_state holds dL/de^t accumulated from later steps.
  std::unordered_map<EntityId, double> g_state;
  Vector g_rel_ctx(d, 0.0);  // dL/d rel_ctx_out of the current step
  Vector g_filtered(m), g_raw(m), g_z2(m), g_u(d), g_z1(d), g_q(d), g_query(d), g_input(2 * d);
  for (std::size_t ti = steps; ti-- > 0;) {
    const auto& step = trace.steps[ti];
    const auto& filtered = step.masked.filtered_scores;
    for (const auto& [id, score] : step.entity_state.entries()) g_state[id] += c[ti] * g_final_at(id);

    std::fill(g_filtered.begin(), g_filtered.end(), 0.0);

    // Relation context feeds the next step's attention.
    if (ti + 1 < steps) {
      double total = 0.0;
      for (double f : filtered) total += f;
      const double denom = std::max(total, kRelationContextEpsilon);
      const bool normalized = total > kRelationContextEpsilon;
      for (std::size_t k = 0; k < m; ++k) {
        const double f = filtered[k];
        auto e = params.rel_embed.row(k);
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i)
          acc += g_rel_ctx[i] * (normalized ? e[i] - step.rel_ctx_out[i] : e[i]);
        g_filtered[k] += acc / denom;
        if (f != 0.0) {
          auto ge = grads.rel_embed.row(k);
          for (std::size_t i = 0; i < d; ++i) ge[i] += g_rel_ctx[i] * f / denom;
        }
      }
    }

    // Propagation: pre[o] = sum sub_p * filtered[r]; e = clamp(pre).
    std::unordered_map<EntityId, double> g_pre;
    for (const auto& [id, pre] : step.pre_clamp) {
      auto it = g_state.find(id);
      const double g = it == g_state.end() ? 0.0 : it->second;
      g_pre[id] = (cfg.clamp && pre > 1.0) ? 0.0 : g;
    }
    std::unordered_map<EntityId, double> g_prev_state;
    for (const auto& act : step.masked.active) {
      const auto& t = kg.triple(act.triple);
      const double g = g_pre[t.object];
      if (g == 0.0) continue;
      g_filtered[t.relation] += g * act.sub_p;
      if (ti > 0) g_prev_state[t.subject] += g * filtered[t.relation];
    }
    g_state = std::move(g_prev_state);

    // Mask bits are constants.
    for (std::size_t k = 0; k < m; ++k)
      g_raw[k] = cfg.use_mask ? g_filtered[k] * step.masked.step_mask[k] : g_filtered[k];

    // Relation MLP.
    const auto& scores = step.scoring.scores;
    const auto& hidden = step.scoring.hidden;
    for (std::size_t k = 0; k < m; ++k) g_z2[k] = g_raw[k] * scores[k] * (1.0 - scores[k]);
    add_outer(grads.kg_out.weight, g_z2, hidden);
    for (std::size_t k = 0; k < m; ++k) grads.kg_out.bias[k] += g_z2[k];
    transpose_times(params.kg_out.weight, g_z2, g_u);
    for (std::size_t i = 0; i < d; ++i) g_z1[i] = g_u[i] * (1.0 - hidden[i] * hidden[i]);
    add_outer(grads.kg_hidden.weight, g_z1, step.attention.q_step);
    for (std::size_t i = 0; i < d; ++i) grads.kg_hidden.bias[i] += g_z1[i];
    transpose_times(params.kg_hidden.weight, g_z1, g_q);

    // Attention.
    const auto& attn = step.attention.attn;
    Vector g_attn(attn.size());
    double weighted = 0.0;
    for (std::size_t i = 0; i < attn.size(); ++i) {
      g_attn[i] = dot(g_q, enc.hidden.row(i));
      weighted += attn[i] * g_attn[i];
    }
    std::fill(g_query.begin(), g_query.end(), 0.0);
    for (std::size_t i = 0; i < attn.size(); ++i) {
      const double g_logit = attn[i] * (g_attn[i] - weighted);
      auto h = enc.hidden.row(i);
      for (std::size_t k = 0; k < d; ++k) g_query[k] += g_logit * h[k];
    }
    Vector input(2 * d);
    std::copy(enc.pooled.begin(), enc.pooled.end(), input.begin());
    std::copy(step.rel_ctx_in.begin(), step.rel_ctx_in.end(),
              input.begin() + static_cast<std::ptrdiff_t>(d));
    add_outer(grads.attn_proj[ti].weight, g_query, input);
    for (std::size_t k = 0; k < d; ++k) grads.attn_proj[ti].bias[k] += g_query[k];
    transpose_times(params.attn_proj[ti].weight, g_query, g_input);
    std::copy(g_input.begin() + static_cast<std::ptrdiff_t>(d), g_input.end(), g_rel_ctx.begin());
  }

  return loss(trace.final_state, answer);
}

}  // namespace rfkg
