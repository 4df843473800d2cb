#pragma once

#include <string>
#include <vector>

#include "dpat/corpus.hpp"
#include "dpat/jsonio.hpp"
#include "dpat/vector_store.hpp"

namespace dpat {

enum class ProviderMode { file, http };

struct ProviderConfig {
    ProviderMode mode = ProviderMode::file;
    std::string vector_file;  // file mode: path of the vector store
    std::string endpoint;     // http mode: e.g. http://host:port/v1/embeddings
    std::string model_name = "nlp_gte_sentence-embedding";
    std::size_t batch_size = 16;
    std::string auth_env_var = "DPAT_EMBED_TOKEN";
    int max_retries = 3;
    double timeout_s = 30.0;
    double backoff_base_s = 0.5;  // exponential, doubles per retry
    std::size_t concurrency = 1;  // concurrent in-flight batches
    std::size_t expected_dim = 0; // 0 = accept whatever the source provides

    static ProviderConfig from_json(const Json& j);
    Json to_json() const;
};

// One vector per utterance, rows in stream order. File mode is a pure lookup;
// http mode batches requests of size <= batch_size and retries each batch
// with exponential backoff. On any failure no partial matrix escapes.
EmbeddingMatrix get_vectors(const std::vector<const Utterance*>& stream,
                            const ProviderConfig& provider);

// Request counter for the http path, exposed for tests and logs.
std::size_t http_requests_issued();
void reset_http_request_counter();

}  // namespace dpat
