#include "cbmrag/agents/pipeline.hpp"

#include <cstdio>
#include <ctime>
#include <optional>
#include <sstream>

#include "cbmrag/error.hpp"
#include "cbmrag/util.hpp"

namespace cbmrag::agents {

using providers::ChatMessage;
using providers::Role;

void to_json(nlohmann::json& j, const ReportBundle& r) {
  j = nlohmann::json{{"findings", r.findings},
                     {"diagnosis", r.diagnosis},
                     {"guidelines", r.guidelines},
                     {"traces", r.traces},
                     {"created_at", r.created_at}};
}

void from_json(const nlohmann::json& j, ReportBundle& r) {
  j.at("findings").get_to(r.findings);
  j.at("diagnosis").get_to(r.diagnosis);
  j.at("guidelines").get_to(r.guidelines);
  j.at("traces").get_to(r.traces);
  j.at("created_at").get_to(r.created_at);
}

std::string format_timestamp(std::chrono::system_clock::time_point t) {
  const auto secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string fixed(double v, const char* fmt = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string format_hits(const std::vector<retrieval::RetrievalHit>& hits) {
  if (hits.empty()) return "No matching passages.";
  std::ostringstream out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto& h = hits[i];
    out << "[" << i + 1 << "] " << h.chunk.doc_id << "#" << h.chunk.chunk_index << " (score "
        << fixed(h.score) << "): " << h.chunk.text;
    if (i + 1 < hits.size()) out << "\n";
  }
  return out.str();
}

std::string prediction_line(const cbm::Prediction& p) {
  return "Predicted class: " + p.predicted_label + " (probability " +
         fixed(p.probabilities.at(p.predicted_index)) + ")";
}

}  // namespace

std::string summarize_concepts(const CaseFindings& in, std::size_t top_n) {
  const auto& per = in.contributions.per_concept;
  const auto order = cbm::rank_by_magnitude(per);
  std::ostringstream out;
  for (std::size_t r = 0; r < std::min(top_n, order.size()); ++r) {
    const auto j = order[r];
    const auto& c = in.concepts.concepts.at(j);
    out << r + 1 << ". " << c.name << " [" << c.concept_id << "] score="
        << fixed(in.concept_state.normalized.at(j)) << " contribution=" << fixed(per[j], "%+.4f");
    if (j < in.overridden.size() && in.overridden[j]) out << " (edited by clinician)";
    if (r + 1 < std::min(top_n, order.size())) out << "\n";
  }
  return out.str();
}

AgentSpec make_disease_agent(const std::string& class_label,
                             std::shared_ptr<retrieval::RetrievalStore> store,
                             providers::TextEmbedder& embedder, const PromptLibrary& prompts,
                             const PipelineOptions& options) {
  const auto store_name = retrieval::store_for_label(class_label);
  AgentSpec spec;
  spec.name = store_name + "_agent";
  spec.role_prompt = prompts.get(spec.name);
  spec.max_iterations = options.max_iterations;
  spec.temperature = options.temperature;
  spec.max_tokens = options.max_tokens;
  const auto k = options.retrieval_k;
  spec.tools.push_back(
      {"retrieve",
       "Search the " + store_name + " knowledge base. Input: a short search query.",
       [store, &embedder, k](const std::string& query) {
         if (util::trim(query).empty()) return std::string("error: empty query");
         return format_hits(store->query(query, k, embedder));
       }});
  return spec;
}

ConsultResult radiologist_consult(const CaseFindings& in, const retrieval::StoreCatalog& catalog,
                                  providers::TextEmbedder& embedder, providers::ChatModel& model,
                                  const PromptLibrary& prompts, const PipelineOptions& options) {
  const auto& label = in.prediction.predicted_label;
  ConsultResult result;
  result.disease_store = retrieval::store_for_label(label);
  auto agent = make_disease_agent(label, catalog.get(result.disease_store), embedder, prompts,
                                  options);

  const auto summary = summarize_concepts(in, options.top_concepts);
  const std::string task =
      prediction_line(in.prediction) + "\nTop concepts by absolute contribution:\n" + summary +
      "\nUse the retrieve tool to gather supporting evidence from the " + result.disease_store +
      " knowledge base, then give your assessment as a Final Answer.";
  auto specialist = run_react(agent, task, model);

  const std::vector<ChatMessage> messages{
      {Role::system, prompts.get("radiologist")},
      {Role::user, prediction_line(in.prediction) + "\nConcept evidence:\n" + summary +
                       "\n\nSpecialist assessment (" + agent.name + "):\n" +
                       specialist.final_answer +
                       "\n\nConsolidate this into findings for the report writer."}};
  const auto reply = model.complete(messages, options.temperature, options.max_tokens);
  result.consolidated_findings = util::trim(reply);
  if (result.consolidated_findings.empty()) {
    throw Error(Errc::malformed_response, "radiologist returned an empty consolidation");
  }

  AgentTrace radiologist;
  radiologist.agent_name = "radiologist";
  radiologist.steps.push_back({"Delegating the " + label + " case to the specialist agent.",
                               "consult_" + agent.name, task, specialist.final_answer});
  radiologist.final_answer = result.consolidated_findings;
  radiologist.terminated_by = Termination::final_answer;

  result.traces.push_back(std::move(specialist.trace));
  result.traces.push_back(std::move(radiologist));
  return result;
}

ReportBundle parse_report(const std::string& reply) {
  static constexpr std::string_view kHeaders[] = {"FINDINGS:", "DIAGNOSIS:", "GUIDELINES:"};
  std::vector<std::string> lines;
  {
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  // section index -> first line holding its header
  std::optional<std::size_t> header_line[3];
  const auto header_at = [&](std::size_t i) -> int {
    const auto first = lines[i].find_first_not_of(" \t");
    if (first == std::string::npos) return -1;
    for (int h = 0; h < 3; ++h) {
      if (lines[i].compare(first, kHeaders[h].size(), kHeaders[h]) == 0) return h;
    }
    return -1;
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int h = header_at(i);
    if (h >= 0 && !header_line[h]) header_line[h] = i;
  }

  std::string sections[3];
  for (int h = 0; h < 3; ++h) {
    if (!header_line[h]) {
      throw Error(Errc::malformed_report, std::string("report is missing '") +
                                              std::string(kHeaders[h]) + "'");
    }
    const auto start = *header_line[h];
    const auto& first = lines[start];
    std::string text = first.substr(first.find(kHeaders[h]) + kHeaders[h].size());
    for (std::size_t i = start + 1; i < lines.size() && header_at(i) < 0; ++i) {
      text += "\n" + lines[i];
    }
    sections[h] = util::trim(text);
    if (sections[h].empty()) {
      throw Error(Errc::malformed_report, std::string("report section '") +
                                              std::string(kHeaders[h]) + "' is empty");
    }
  }
  ReportBundle bundle;
  bundle.findings = std::move(sections[0]);
  bundle.diagnosis = std::move(sections[1]);
  bundle.guidelines = std::move(sections[2]);
  return bundle;
}

ReportBundle write_report(const std::string& consolidated_findings,
                          const cbm::Prediction& prediction,
                          const std::vector<retrieval::RetrievalHit>& hits,
                          providers::ChatModel& model, const PromptLibrary& prompts,
                          const PipelineOptions& options, std::vector<AgentTrace> prior_traces,
                          std::chrono::system_clock::time_point now) {
  if (util::trim(consolidated_findings).empty()) {
    throw Error(Errc::invalid_argument, "write_report: consolidated findings are empty");
  }
  std::string user = prediction_line(prediction) + "\n\nConsolidated findings:\n" +
                     consolidated_findings;
  if (!hits.empty()) user += "\n\nAdditional context from uploaded documents:\n" + format_hits(hits);
  user += "\n\nWrite the report now using the headers FINDINGS:, DIAGNOSIS: and GUIDELINES:.";

  const std::vector<ChatMessage> messages{{Role::system, prompts.get("report_writer")},
                                          {Role::user, user}};
  const auto reply = model.complete(messages, options.temperature, options.max_tokens);
  auto bundle = parse_report(reply);

  AgentTrace writer;
  writer.agent_name = "report_writer";
  writer.final_answer = util::trim(reply);
  writer.terminated_by = Termination::final_answer;
  bundle.traces = std::move(prior_traces);
  bundle.traces.push_back(std::move(writer));
  bundle.created_at = format_timestamp(now);
  return bundle;
}

}  // namespace cbmrag::agents
