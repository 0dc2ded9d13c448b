#pragma once
// Pluggable sentence-embedding provider used by the step- and
// answer-similarity rewards.

#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace daslam::embed {

struct EmbeddingVector {
  std::vector<double> values;
  size_t dim() const { return values.size(); }
};

struct EmbedError : std::runtime_error {
  EmbedError(std::string msg, bool retryable_)
      : std::runtime_error(std::move(msg)), retryable(retryable_) {}
  bool retryable;
};

/// Deterministic per instance: the same text always returns the identical
/// vector (cache enforced). embed() must be safe under concurrent calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  EmbeddingVector embed(const std::string& text);

 protected:
  virtual EmbeddingVector compute(const std::string& text) = 0;

 private:
  std::mutex mutex_;
  std::map<std::string, EmbeddingVector> cache_;
};

// Seeded feature hashing: each token maps to one signed bucket, counts are
// accumulated and L2-normalized. Signed buckets keep unrelated sentences
// near-orthogonal in expectation. Empty text maps to the zero vector.
class HashedBagOfWordsProvider : public EmbeddingProvider {
 public:
  explicit HashedBagOfWordsProvider(size_t dim = 256, uint64_t seed = 0);

 protected:
  EmbeddingVector compute(const std::string& text) override;

 private:
  size_t dim_;
  uint64_t seed_;
};

struct RemoteServiceConfig {
  std::string endpoint;       // e.g. "http://localhost:8080"
  std::string model_name;
  std::string path = "/v1/embeddings";
  std::string auth_env_var = "EMBED_API_KEY";
  double timeout_s = 30.0;
};

// HTTP provider. POST {"model": ..., "input": [text]} and reads
// {"data": [{"embedding": [...]}]}. Network and timeout failures are
// retryable EmbedErrors; malformed responses are protocol errors.
class RemoteServiceProvider : public EmbeddingProvider {
 public:
  explicit RemoteServiceProvider(RemoteServiceConfig config);

 protected:
  EmbeddingVector compute(const std::string& text) override;

 private:
  RemoteServiceConfig config_;
};

// dot(u,v)/(|u||v|); 0 when either norm is 0. Throws std::invalid_argument
// on dimension mismatch.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

}  // namespace daslam::embed
