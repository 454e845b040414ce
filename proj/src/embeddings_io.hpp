#pragma once

#include <string>

#include "diagram_model.hpp"

namespace diagram::model {

enum class EmbeddingFormat { text, binary };

// Text: header `DIAGRAM v1 <n> <k> <mode> config=<hex> dataset=<hex>`, then one
// line per node `<id> <z: k values> <o: k values> <i: k values>` printed with
// 17 significant digits. Binary: magic "DIAGRAMB", u32 version, then the same
// fields length-prefixed and the matrices as raw doubles.
void export_embeddings(const EmbeddingSet& set, const std::string& path, EmbeddingFormat format = EmbeddingFormat::text);
// Detects the format from the leading bytes.
EmbeddingSet import_embeddings(const std::string& path);

std::string serialize_embeddings(const EmbeddingSet& set, EmbeddingFormat format);
EmbeddingSet parse_embeddings(const std::string& bytes, const std::string& origin);

}  // namespace diagram::model
