#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbmrag/agents/prompts.hpp"
#include "cbmrag/agents/react.hpp"
#include "cbmrag/cbm/bottleneck.hpp"
#include "cbmrag/cbm/classifier.hpp"
#include "cbmrag/cbm/concepts.hpp"
#include "cbmrag/retrieval/store.hpp"

namespace cbmrag::agents {

struct PipelineOptions {
  std::size_t top_concepts = 5;
  std::size_t retrieval_k = 4;
  std::size_t upload_hits = 3;
  int max_iterations = 8;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct ReportBundle {
  std::string findings;
  std::string diagnosis;
  std::string guidelines;
  std::vector<AgentTrace> traces;
  std::string created_at;  // ISO-8601 UTC

  bool operator==(const ReportBundle&) const = default;
};

void to_json(nlohmann::json& j, const ReportBundle& r);
void from_json(const nlohmann::json& j, ReportBundle& r);

std::string format_timestamp(std::chrono::system_clock::time_point t);

// Everything the radiologist needs to know about the classified case.
struct CaseFindings {
  const cbm::Prediction& prediction;
  const cbm::ContributionScores& contributions;  // for the predicted class
  const cbm::ConceptSet& concepts;
  const cbm::ConceptVector& concept_state;       // possibly user-edited
  std::vector<bool> overridden;                  // per concept; may be empty
};

// Top concepts by |contribution| (ties by index) rendered one per line.
std::string summarize_concepts(const CaseFindings& in, std::size_t top_n);

// Disease agent for a class label: a ReAct agent whose "retrieve" tool is
// bound to the label's canonical store.
AgentSpec make_disease_agent(const std::string& class_label,
                             std::shared_ptr<retrieval::RetrievalStore> store,
                             providers::TextEmbedder& embedder, const PromptLibrary& prompts,
                             const PipelineOptions& options);

struct ConsultResult {
  std::string consolidated_findings;
  std::string disease_store;
  std::vector<AgentTrace> traces;  // disease agent, then radiologist
};

// Routes to the disease agent of the predicted class, then asks the
// radiologist to consolidate that agent's answer with the concept evidence.
// Errors: unknown_class_label, unknown_store, malformed_response (empty
// consolidation), provider errors.
ConsultResult radiologist_consult(const CaseFindings& in, const retrieval::StoreCatalog& catalog,
                                  providers::TextEmbedder& embedder, providers::ChatModel& model,
                                  const PromptLibrary& prompts, const PipelineOptions& options);

// Splits a reply into the FINDINGS/DIAGNOSIS/GUIDELINES sections.
// Errors: malformed_report when a header is missing or a section is empty.
ReportBundle parse_report(const std::string& reply);

// One completion with the report template; traces = prior_traces followed by
// the report writer's own trace.
// Errors: invalid_argument (empty findings), malformed_report, provider errors.
ReportBundle write_report(const std::string& consolidated_findings,
                          const cbm::Prediction& prediction,
                          const std::vector<retrieval::RetrievalHit>& hits,
                          providers::ChatModel& model, const PromptLibrary& prompts,
                          const PipelineOptions& options,
                          std::vector<AgentTrace> prior_traces = {},
                          std::chrono::system_clock::time_point now =
                              std::chrono::system_clock::now());

}  // namespace cbmrag::agents
