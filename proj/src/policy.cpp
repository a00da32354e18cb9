#include "rlep/policy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace rlep {

PolicyParams PolicyParams::zeros(Vocab vocab, int context_len) {
  if (vocab.size < 2) fail("invalid-params", "vocab size must be >= 2");
  if (context_len < 1) fail("invalid-params", "context_len must be >= 1");
  PolicyParams p;
  p.vocab = vocab;
  p.context_len = context_len;
  p.logits.assign(static_cast<std::size_t>(p.row_count()) * vocab.size, 0.0);
  return p;
}

std::int64_t PolicyParams::row_count() const {
  std::int64_t rows = 1;
  for (int i = 0; i < context_len; ++i) rows *= context_base();
  return rows;
}

std::int64_t PolicyParams::context_row(const TokenSeq& prompt,
                                       const TokenSeq& response,
                                       std::size_t pos) const {
  // Context = last context_len tokens of prompt ++ response[0..pos),
  // left-padded with the pad id.
  std::int64_t row = 0;
  std::int64_t total = static_cast<std::int64_t>(prompt.size()) +
                       static_cast<std::int64_t>(pos);
  for (int i = context_len; i >= 1; --i) {
    std::int64_t idx = total - i;
    int tok;
    if (idx < 0) {
      tok = vocab.pad_context_id();
    } else if (idx < static_cast<std::int64_t>(prompt.size())) {
      tok = prompt[idx];
    } else {
      tok = response[idx - prompt.size()];
    }
    row = row * context_base() + tok;
  }
  return row;
}

void SparseGrad::accumulate(std::int64_t row, const std::vector<double>& delta,
                            double scale) {
  auto& dst = rows[row];
  if (dst.empty()) dst.assign(delta.size(), 0.0);
  for (std::size_t i = 0; i < delta.size(); ++i) dst[i] += scale * delta[i];
}

void SparseGrad::add(const SparseGrad& other, double scale) {
  for (const auto& [row, vals] : other.rows) accumulate(row, vals, scale);
}

void SparseGrad::scale(double factor) {
  for (auto& [row, vals] : rows)
    for (double& v : vals) v *= factor;
}

double SparseGrad::max_abs() const {
  double m = 0.0;
  for (const auto& [row, vals] : rows)
    for (double v : vals) m = std::max(m, std::abs(v));
  return m;
}

bool SparseGrad::finite() const {
  for (const auto& [row, vals] : rows)
    for (double v : vals)
      if (!std::isfinite(v)) return false;
  return true;
}

namespace {

// Softmax of one logit row. Throws on non-finite logits.
std::vector<double> row_softmax(const PolicyParams& params, std::int64_t row,
                                double temperature) {
  const double* l = params.row(row);
  const int v = params.vocab.size;
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < v; ++i) {
    if (!std::isfinite(l[i]))
      fail("invalid-params", "non-finite logit in row " + std::to_string(row));
    mx = std::max(mx, l[i] / temperature);
  }
  std::vector<double> p(v);
  double z = 0.0;
  for (int i = 0; i < v; ++i) {
    p[i] = std::exp(l[i] / temperature - mx);
    z += p[i];
  }
  for (int i = 0; i < v; ++i) p[i] /= z;
  return p;
}

double row_log_softmax_at(const PolicyParams& params, std::int64_t row,
                          TokenId token) {
  const double* l = params.row(row);
  const int v = params.vocab.size;
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < v; ++i) {
    if (!std::isfinite(l[i]))
      fail("invalid-params", "non-finite logit in row " + std::to_string(row));
    mx = std::max(mx, l[i]);
  }
  double z = 0.0;
  for (int i = 0; i < v; ++i) z += std::exp(l[i] - mx);
  return l[token] - mx - std::log(z);
}

std::int64_t row_for_context(const PolicyParams& params,
                             const TokenSeq& context) {
  TokenSeq empty;
  return params.context_row(context, empty, 0);
}

// Keeps the smallest descending-probability prefix with cumulative mass
// >= top_p and renormalizes. Ties broken by lower token id (stable sort).
void nucleus_truncate(std::vector<double>& p, double top_p) {
  std::vector<int> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return p[a] > p[b]; });
  double cum = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    cum += p[order[keep]];
    ++keep;
    if (cum >= top_p) break;
  }
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = p[order[i]] / cum;
  p = std::move(out);
}

void check_tokens(const PolicyParams& params, const TokenSeq& tokens,
                  const char* what) {
  for (TokenId t : tokens) {
    if (!params.vocab.valid_token(t))
      fail("invalid-token", std::string(what) + " token " + std::to_string(t) +
                                " outside vocab of size " +
                                std::to_string(params.vocab.size));
  }
}

}  // namespace

std::vector<double> next_token_dist(const PolicyParams& params,
                                    const TokenSeq& context,
                                    double temperature, double top_p) {
  if (!(temperature > 0.0))
    fail("invalid-params", "temperature must be positive");
  if (!(top_p > 0.0 && top_p <= 1.0))
    fail("invalid-params", "top_p must lie in (0, 1]");
  check_tokens(params, context, "context");

  std::int64_t row = row_for_context(params, context);
  std::vector<double> p = row_softmax(params, row, temperature);
  if (top_p < 1.0) nucleus_truncate(p, top_p);
  return p;
}

SampledSequence sample(const PolicyParams& params, const TokenSeq& prompt,
                       int max_len, double temperature, double top_p,
                       Rng& rng) {
  if (max_len < 1) fail("invalid-params", "max_len must be >= 1");
  check_tokens(params, prompt, "prompt");

  SampledSequence out;
  const int end = params.vocab.end_token();
  for (int t = 0; t < max_len; ++t) {
    std::int64_t row = params.context_row(prompt, out.tokens, out.tokens.size());
    std::vector<double> decode_dist = row_softmax(params, row, temperature);
    if (top_p < 1.0) nucleus_truncate(decode_dist, top_p);
    TokenId tok = static_cast<TokenId>(categorical(rng, decode_dist));
    // Ratio log-probs are always evaluated under the plain temperature-1
    // policy, not the decoding distribution.
    out.per_token_logprob.push_back(row_log_softmax_at(params, row, tok));
    out.tokens.push_back(tok);
    if (tok == end) break;
  }
  out.truncated = out.tokens.empty() || out.tokens.back() != end;
  return out;
}

TokenSeq greedy_decode(const PolicyParams& params, const TokenSeq& prompt,
                       int max_len) {
  check_tokens(params, prompt, "prompt");
  TokenSeq tokens;
  const int end = params.vocab.end_token();
  for (int t = 0; t < max_len; ++t) {
    std::int64_t row = params.context_row(prompt, tokens, tokens.size());
    const double* l = params.row(row);
    int best = 0;
    for (int i = 1; i < params.vocab.size; ++i) {
      if (!std::isfinite(l[i]))
        fail("invalid-params", "non-finite logit in row " + std::to_string(row));
      if (l[i] > l[best]) best = i;
    }
    tokens.push_back(best);
    if (best == end) break;
  }
  return tokens;
}

std::vector<double> row_dist(const PolicyParams& params, std::int64_t row) {
  return row_softmax(params, row, 1.0);
}

std::vector<double> logprob(const PolicyParams& params, const TokenSeq& prompt,
                            const TokenSeq& response) {
  if (response.empty()) fail("invalid-params", "response must be non-empty");
  check_tokens(params, prompt, "prompt");
  check_tokens(params, response, "response");
  std::vector<double> out(response.size());
  for (std::size_t t = 0; t < response.size(); ++t) {
    std::int64_t row = params.context_row(prompt, response, t);
    out[t] = row_log_softmax_at(params, row, response[t]);
  }
  return out;
}

SparseGrad grad_logprob(const PolicyParams& params, const TokenSeq& prompt,
                        const TokenSeq& response) {
  if (response.empty()) fail("invalid-params", "response must be non-empty");
  check_tokens(params, prompt, "prompt");
  check_tokens(params, response, "response");
  SparseGrad g;
  for (std::size_t t = 0; t < response.size(); ++t) {
    std::int64_t row = params.context_row(prompt, response, t);
    std::vector<double> delta = row_softmax(params, row, 1.0);
    for (double& v : delta) v = -v;
    delta[response[t]] += 1.0;
    g.accumulate(row, delta);
  }
  return g;
}

void save_params(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open for writing: " + path);
  out << "rlep-policy v1\n";
  out << "vocab " << params.vocab.size << "\n";
  out << "context_len " << params.context_len << "\n";
  out << "rows " << params.row_count() << " cols " << params.vocab.size
      << "\n";
  char buf[64];
  const int v = params.vocab.size;
  for (std::int64_t r = 0; r < params.row_count(); ++r) {
    const double* l = params.row(r);
    for (int c = 0; c < v; ++c) {
      std::snprintf(buf, sizeof(buf), "%a", l[c]);
      out << buf << (c + 1 == v ? '\n' : ' ');
    }
  }
  if (!out) fail("io", "write failed: " + path);
}

PolicyParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open: " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "rlep-policy" || version != "v1")
    fail("io", "not a policy checkpoint: " + path);
  std::string key;
  int vocab_size = 0, context_len = 0;
  std::int64_t rows = 0;
  int cols = 0;
  in >> key >> vocab_size;
  if (key != "vocab") fail("io", "bad checkpoint header (vocab): " + path);
  in >> key >> context_len;
  if (key != "context_len")
    fail("io", "bad checkpoint header (context_len): " + path);
  in >> key >> rows;
  if (key != "rows") fail("io", "bad checkpoint header (rows): " + path);
  in >> key >> cols;
  if (key != "cols") fail("io", "bad checkpoint header (cols): " + path);

  PolicyParams p = PolicyParams::zeros(Vocab{vocab_size}, context_len);
  if (rows != p.row_count() || cols != vocab_size)
    fail("io", "checkpoint shape mismatch: " + path);
  std::string tok;
  for (std::size_t i = 0; i < p.logits.size(); ++i) {
    if (!(in >> tok)) fail("io", "truncated checkpoint: " + path);
    char* endp = nullptr;
    p.logits[i] = std::strtod(tok.c_str(), &endp);
    if (endp == tok.c_str() || *endp != '\0')
      fail("io", "bad value '" + tok + "' in checkpoint: " + path);
    if (!std::isfinite(p.logits[i]))
      fail("invalid-params", "non-finite logit in checkpoint: " + path);
  }
  if (in >> tok) fail("io", "trailing data in checkpoint: " + path);
  return p;
}

}  // namespace rlep
