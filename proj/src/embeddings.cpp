#include "daslam/embeddings.hpp"

#include <cmath>
#include <cstdlib>

#include "httplib.h"
#include "json.hpp"

#include "daslam/text_analysis.hpp"

namespace daslam::embed {
namespace {

// FNV-1a with the seed folded in; stable across platforms, unlike std::hash.
uint64_t seeded_hash(const std::string& token, uint64_t seed) {
  uint64_t h = 14695981039346656037ull ^ (seed * 0x9e3779b97f4a7c15ull);
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

EmbeddingVector EmbeddingProvider::embed(const std::string& text) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = cache_.find(text);
  if (it != cache_.end()) return it->second;
  EmbeddingVector v = compute(text);
  cache_.emplace(text, v);
  return v;
}

HashedBagOfWordsProvider::HashedBagOfWordsProvider(size_t dim, uint64_t seed)
    : dim_(dim), seed_(seed) {}

EmbeddingVector HashedBagOfWordsProvider::compute(const std::string& text) {
  EmbeddingVector v;
  v.values.assign(dim_, 0.0);
  for (const auto& tok : text::tokenize(text)) {
    uint64_t h = seeded_hash(tok, seed_);
    size_t bucket = h % dim_;
    double sign = ((h >> 63) & 1) ? -1.0 : 1.0;
    v.values[bucket] += sign;
  }
  double norm = 0.0;
  for (double x : v.values) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v.values) x /= norm;
  }
  return v;
}

RemoteServiceProvider::RemoteServiceProvider(RemoteServiceConfig config)
    : config_(std::move(config)) {}

EmbeddingVector RemoteServiceProvider::compute(const std::string& text) {
  if (text.empty())
    throw EmbedError("remote embedding of empty text", /*retryable=*/false);

  httplib::Client client(config_.endpoint);
  client.set_connection_timeout(static_cast<int>(config_.timeout_s), 0);
  client.set_read_timeout(static_cast<int>(config_.timeout_s), 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.auth_env_var.c_str()))
    headers.emplace("Authorization", std::string("Bearer ") + key);

  nlohmann::json body = {{"model", config_.model_name},
                         {"input", nlohmann::json::array({text})}};
  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res)
    throw EmbedError("embedding request failed: " + httplib::to_string(res.error()),
                     /*retryable=*/true);
  if (res->status == 429)
    throw EmbedError("embedding service throttled (429)", /*retryable=*/true);
  if (res->status != 200)
    throw EmbedError("embedding service status " + std::to_string(res->status),
                     /*retryable=*/false);

  nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("data") ||
      !parsed["data"].is_array() || parsed["data"].empty() ||
      !parsed["data"][0].contains("embedding"))
    throw EmbedError("malformed embedding response", /*retryable=*/false);

  EmbeddingVector v;
  for (const auto& x : parsed["data"][0]["embedding"]) {
    if (!x.is_number())
      throw EmbedError("malformed embedding response", /*retryable=*/false);
    v.values.push_back(x.get<double>());
  }
  if (v.values.empty())
    throw EmbedError("malformed embedding response", /*retryable=*/false);
  return v;
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim())
    throw std::invalid_argument("cosine: dimension mismatch (" +
                                std::to_string(u.dim()) + " vs " +
                                std::to_string(v.dim()) + ")");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.values.size(); ++i) {
    dot += u.values[i] * v.values[i];
    nu += u.values[i] * u.values[i];
    nv += v.values[i] * v.values[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace daslam::embed
