#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rlep/common.hpp"

namespace rlep {

// Token alphabet. The last id is the reserved END token; contexts shorter
// than the model order are left-padded with pad_context_id(), which sits just
// outside the sampleable range and only ever appears inside context tuples.
struct Vocab {
  int size = 2;

  int end_token() const { return size - 1; }
  int pad_context_id() const { return size; }
  bool valid_token(TokenId t) const { return t >= 0 && t < size; }
};

// Dense logit table of a fixed-order autoregressive softmax policy. Rows are
// context tuples encoded in base (vocab.size + 1) so padded contexts get
// their own rows; columns are next-token logits.
struct PolicyParams {
  Vocab vocab;
  int context_len = 2;
  std::vector<double> logits;  // row_count() * vocab.size, row-major

  static PolicyParams zeros(Vocab vocab, int context_len);

  int context_base() const { return vocab.size + 1; }
  std::int64_t row_count() const;
  const double* row(std::int64_t r) const { return &logits[r * vocab.size]; }
  double* row(std::int64_t r) { return &logits[r * vocab.size]; }

  // Row index for the context preceding position `pos` of prompt+response.
  // `pos` counts from 0 at the first response token.
  std::int64_t context_row(const TokenSeq& prompt, const TokenSeq& response,
                           std::size_t pos) const;
};

struct SampledSequence {
  TokenSeq tokens;
  std::vector<double> per_token_logprob;  // nats, temperature-1 policy
  bool truncated = false;                 // hit max_len without END
};

// Sparse gradient over the logit table: only visited rows carry entries.
// Ordered by row index so accumulation is deterministic.
struct SparseGrad {
  std::map<std::int64_t, std::vector<double>> rows;

  void accumulate(std::int64_t row, const std::vector<double>& delta,
                  double scale = 1.0);
  void add(const SparseGrad& other, double scale = 1.0);
  void scale(double factor);
  double max_abs() const;
  bool finite() const;
};

// Next-token distribution for a (possibly short) context. Temperature divides
// logits before the softmax; top-p keeps the smallest descending-probability
// prefix with cumulative mass >= top_p and renormalizes. Ties in probability
// are broken by lower token id.
std::vector<double> next_token_dist(const PolicyParams& params,
                                    const TokenSeq& context,
                                    double temperature, double top_p);

// Autoregressive sampling until END or max_len. per_token_logprob records the
// log-probability of each emitted token under the untruncated temperature-1
// distribution (the quantity importance ratios are built from), regardless of
// the decoding temperature/top-p.
SampledSequence sample(const PolicyParams& params, const TokenSeq& prompt,
                       int max_len, double temperature, double top_p,
                       Rng& rng);

// Greedy (argmax) decoding, ties broken by lower token id.
TokenSeq greedy_decode(const PolicyParams& params, const TokenSeq& prompt,
                       int max_len);

// Exact per-token log-probabilities of `response` given `prompt`.
std::vector<double> logprob(const PolicyParams& params, const TokenSeq& prompt,
                            const TokenSeq& response);

// Temperature-1 softmax over one context row.
std::vector<double> row_dist(const PolicyParams& params, std::int64_t row);

// Gradient of the summed response log-probability with respect to the logits:
// each visited context row receives onehot(emitted) - softmax(row).
SparseGrad grad_logprob(const PolicyParams& params, const TokenSeq& prompt,
                        const TokenSeq& response);

// Checkpoint serialization. Text format with a fixed header and hexfloat
// values, so round-trips are bit-exact:
//   rlep-policy v1
//   vocab <size>
//   context_len <n>
//   rows <R> cols <V>
//   <R lines of V space-separated hexfloats>
void save_params(const PolicyParams& params, const std::string& path);
PolicyParams load_params(const std::string& path);

}  // namespace rlep
