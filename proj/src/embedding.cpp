#include "dpat/embedding.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "httplib.h"

#include "dpat/errors.hpp"

namespace dpat {

namespace {

std::atomic<std::size_t> g_http_requests{0};

struct ParsedEndpoint {
    std::string host_port;  // scheme://host:port
    std::string path;
};

ParsedEndpoint split_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("provider endpoint must include a scheme: " + endpoint);
    }
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

// One embedding request for a contiguous batch; retries with exponential
// backoff. Returns rows in batch order.
std::vector<std::vector<float>> fetch_batch(const ProviderConfig& cfg,
                                            const std::vector<std::string>& texts,
                                            const std::string& token) {
    const ParsedEndpoint ep = split_endpoint(cfg.endpoint);
    Json body;
    body["model"] = cfg.model_name;
    body["input"] = texts;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay = cfg.backoff_base_s * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        httplib::Client client(ep.host_port);
        client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_s));
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

        g_http_requests.fetch_add(1);
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = "no response (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }

        Json reply;
        try {
            reply = Json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            last_error = std::string("malformed JSON reply: ") + e.what();
            continue;
        }
        if (!reply.contains("data") || !reply["data"].is_array() ||
            reply["data"].size() != texts.size()) {
            throw ProviderError("embedding reply has wrong 'data' shape");
        }
        std::vector<std::vector<float>> rows(texts.size());
        for (const auto& item : reply["data"]) {
            if (!item.contains("index") || !item.contains("embedding")) {
                throw ProviderError("embedding reply item missing index/embedding");
            }
            const std::size_t index = item["index"].get<std::size_t>();
            if (index >= texts.size()) throw ProviderError("embedding reply index out of range");
            std::vector<float> row;
            row.reserve(item["embedding"].size());
            for (const auto& v : item["embedding"]) {
                const double x = v.get<double>();
                const float f = static_cast<float>(x);
                if (!std::isfinite(x) || !std::isfinite(f)) {
                    throw ProviderError("embedding reply contains a non-finite value");
                }
                row.push_back(f);
            }
            rows[index] = std::move(row);
        }
        for (const auto& row : rows) {
            if (row.empty()) throw ProviderError("embedding reply left a batch row unfilled");
        }
        return rows;
    }
    throw ProviderError("embedding request failed after " + std::to_string(cfg.max_retries + 1) +
                        " attempts: " + last_error);
}

EmbeddingMatrix from_file(const std::vector<const Utterance*>& stream,
                          const ProviderConfig& cfg) {
    if (cfg.vector_file.empty()) throw ConfigError("file provider needs vector_file");
    const EmbeddingMatrix store = read_vector_store(cfg.vector_file);
    if (cfg.expected_dim != 0 && store.dim != cfg.expected_dim) {
        throw DataError("vector store dim " + std::to_string(store.dim) +
                        " does not match configured dim " + std::to_string(cfg.expected_dim));
    }
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(store.rows());
    for (std::size_t i = 0; i < store.rows(); ++i) index.emplace(store.ids[i], i);

    EmbeddingMatrix out;
    out.dim = store.dim;
    out.ids.reserve(stream.size());
    out.data.reserve(stream.size() * store.dim);
    for (const Utterance* u : stream) {
        const auto it = index.find(u->id);
        if (it == index.end()) {
            throw DataError("vector store has no row for utterance id '" + u->id + "'");
        }
        out.ids.push_back(u->id);
        const float* row = store.row(it->second);
        out.data.insert(out.data.end(), row, row + store.dim);
    }
    return out;
}

EmbeddingMatrix from_http(const std::vector<const Utterance*>& stream,
                          const ProviderConfig& cfg) {
    if (cfg.endpoint.empty()) throw ConfigError("http provider needs endpoint");
    if (cfg.auth_env_var.empty()) throw ConfigError("http provider needs auth_env_var");
    std::string token;
    if (const char* t = std::getenv(cfg.auth_env_var.c_str())) token = t;

    const std::size_t n = stream.size();
    const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<std::vector<std::vector<float>>> results(n_batches);

    // Batches are independent; assembly below is ordered by input position,
    // so completion order never shows in the output.
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::string first_error;
    auto worker = [&]() {
        while (true) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_batches) return;
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error.empty()) return;
            }
            const std::size_t lo = b * cfg.batch_size;
            const std::size_t hi = std::min(n, lo + cfg.batch_size);
            std::vector<std::string> texts;
            texts.reserve(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) texts.push_back(stream[i]->text);
            try {
                results[b] = fetch_batch(cfg, texts, token);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (first_error.empty()) first_error = e.what();
                return;
            }
        }
    };

    const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.concurrency, n_batches));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (!first_error.empty()) throw ProviderError(first_error);

    EmbeddingMatrix out;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        for (const auto& row : results[b]) {
            if (out.dim == 0) {
                out.dim = row.size();
                if (out.dim == 0) throw ProviderError("embedding service returned empty vectors");
                if (cfg.expected_dim != 0 && out.dim != cfg.expected_dim) {
                    throw ProviderError("embedding dim " + std::to_string(out.dim) +
                                        " does not match configured dim " +
                                        std::to_string(cfg.expected_dim));
                }
            } else if (row.size() != out.dim) {
                throw ProviderError("embedding dimension mismatch between batches (" +
                                    std::to_string(row.size()) + " vs " +
                                    std::to_string(out.dim) + ")");
            }
            out.ids.push_back(stream[pos++]->id);
            out.data.insert(out.data.end(), row.begin(), row.end());
        }
    }
    validate_matrix(out);
    return out;
}

}  // namespace

ProviderConfig ProviderConfig::from_json(const Json& j) {
    ProviderConfig cfg;
    if (!j.is_object()) throw ConfigError("provider config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const Json& v = it.value();
        if (key == "mode") {
            const std::string mode = v.get<std::string>();
            if (mode == "file") cfg.mode = ProviderMode::file;
            else if (mode == "http") cfg.mode = ProviderMode::http;
            else throw ConfigError("provider mode must be 'file' or 'http'");
        } else if (key == "vector_file") cfg.vector_file = v.get<std::string>();
        else if (key == "endpoint") cfg.endpoint = v.get<std::string>();
        else if (key == "model_name") cfg.model_name = v.get<std::string>();
        else if (key == "batch_size") cfg.batch_size = v.get<std::size_t>();
        else if (key == "auth_env_var") cfg.auth_env_var = v.get<std::string>();
        else if (key == "max_retries") cfg.max_retries = v.get<int>();
        else if (key == "timeout_s") cfg.timeout_s = v.get<double>();
        else if (key == "backoff_base_s") cfg.backoff_base_s = v.get<double>();
        else if (key == "concurrency") cfg.concurrency = v.get<std::size_t>();
        else if (key == "dim") cfg.expected_dim = v.get<std::size_t>();
        else throw ConfigError("unknown provider config key '" + key + "'");
    }
    if (cfg.batch_size < 1) throw ConfigError("provider batch_size must be >= 1");
    if (cfg.max_retries < 0) throw ConfigError("provider max_retries must be >= 0");
    if (cfg.mode == ProviderMode::http && cfg.endpoint.empty()) {
        throw ConfigError("http provider requires endpoint");
    }
    return cfg;
}

Json ProviderConfig::to_json() const {
    Json j;
    j["mode"] = mode == ProviderMode::file ? "file" : "http";
    if (!vector_file.empty()) j["vector_file"] = vector_file;
    if (!endpoint.empty()) j["endpoint"] = endpoint;
    j["model_name"] = model_name;
    j["batch_size"] = batch_size;
    j["auth_env_var"] = auth_env_var;
    j["max_retries"] = max_retries;
    j["timeout_s"] = timeout_s;
    j["backoff_base_s"] = backoff_base_s;
    j["concurrency"] = concurrency;
    if (expected_dim != 0) j["dim"] = expected_dim;
    return j;
}

EmbeddingMatrix get_vectors(const std::vector<const Utterance*>& stream,
                            const ProviderConfig& provider) {
    if (stream.empty()) throw DataError("get_vectors: empty stream");
    return provider.mode == ProviderMode::file ? from_file(stream, provider)
                                               : from_http(stream, provider);
}

std::size_t http_requests_issued() { return g_http_requests.load(); }
void reset_http_request_counter() { g_http_requests.store(0); }

}  // namespace dpat
