#include "personasq/prompts.hpp"

#include <algorithm>

#include "personasq/error.hpp"

namespace personasq {

namespace {

constexpr std::string_view kGeneratePersonas =
    R"(In some professional setting, for some document domains, people with different backgrounds would read them with very different purposes/goals and ask very different questions.

Your job is to predict what profession would read this document, and what goals they want to achieve.

The goals should be closely related to the profession. Your prediction should try to be various. The statement describing the goal can be either first-person or a general declarative sentence.

You should think step by step and try your best to be creative. One profession can have different number of goals. The goals should be very diverse but related to the corresponding profession.

The profession can also be non-professional.

The following is a document from $DOMAIN$ $SUBDOMAIN$:

$DOCUMENT CONTENT$.

You should generate output in the following JSON format, for example:

{
    "domain": {
        "subdomain": {
            "profession": ["goal 1.", "goal 2."]
        }
    }
}

According to the document from the domain $DOMAIN$ $SUBDOMAIN$, your answer is:)";

constexpr std::string_view kNormalizePersonas =
    R"(You are an AI helper to help users to classify professions into different groups.

The professions are as follows: $PERSONAS$.

You should return in a JSON format. The key is profession and the value is a list of given professions. For example:

{
    "Accountants": ["Accountants", "Financial Accountants"],
    "Auditors": ["Auditors", "auditors"]
}

Based on the given professions, your answer for the groups of personas is:)";

constexpr std::string_view kGenerateQuestions =
    R"(You are a PDF Reader AI Assistant. You will be given a long PDF document, a user profession, and several goals of the user. Your task is to generate a series of questions that users with the specified profession and goals might be interested in.

The user's profession and goals are provided below:

**Profession:** $PROFESSION$

**Goals:** $GOALS$

Please generate questions that meet the following criteria:

1. **Personalized:** The questions should align with the user's interests and profession.

2. **Logical:** The questions should follow a logical order.

3. **Comprehensive:** The questions should cover as much useful information as possible to ensure the user can achieve their goals.

Output the questions in a JSON format. For example:

{
    "Question 1": "xxx",
    "Question 2": "xxx",
}

Ensure that the output is in a JSON format without any additional text or errors.

Ensure that generate a series of questions as various as possible.

The following is the document:

$DOCUMENT CONTENT$

The generated questions are:)";

constexpr std::string_view kScoreGoals =
    R"(You are an AI assistant to help user to finish the task. You will be provided with one persona, and many goals candidates corresponding to the persona. The goals are the purposes of a user want to achieve by reading a document.

Your job is to score the goals based on the consistency between the goals, persona and the domain of the document.

Provide your rating on a scale from 1 to 5 based on the criteria below:

- **Rating 1**: The goal quality is extremely poor. The generated goal is not described in a valid format with ovbious grammar error or it is not a goal but a question or something else.

- **Rating 2**: The goal quality is somewhat poor. The generated goal is in a valid format but it is totally unrelated to the persona or the document domain.

- **Rating 3**: The goal quality is good. The generated goal is related to both the document and the persona, but the connection is not very strong. The goal is somewhat meaningful. Sometimes, the persona might want to achieve the goal but sometimes not.

- **Rating 4**: The goal quality is very good. The generated goal is closely related to both the document and the target persona. For most cases, the persona may have the goal when they read the document.

- **Rating 5**: The goal quality is excellent. The generated question is highly relevant to both the document and the target persona. The persona always have the goal when they read the document.

Here is the persona: $PERSONA$

Here are the goals that are separated by ";":

$GOALS$

You should return in a JSON format. The key is the repeat of the goal, and the value is the score. For example:

{
    "I want to understand the document in details.": 5
}

Based on the provided persona and goals, your scores for the goals are:)";

constexpr std::string_view kScoreQuestions =
    R"(You will be given a long document, a target persona with specific goals, and several questions that the target persona might ask. Your task is to evaluate the quality of these generated questions based on the document and the target persona's goals.

Here is the document: $DOCUMENT$

In this task, you need to evaluate the quality of the generated questions based on the document and the persona's goals. The quality of the generated questions depends on how meaningful, valuable, and relevant they are to the document and persona's goals.

Provide your rating on a scale from 1 to 5 based on the criteria below:

- **Rating 1**: The question quality is extremely poor. The generated question is completely unrelated to the document and persona's goals.

- **Rating 2**: The question quality is somewhat poor. The generated question is related only to the document or only to persona, but not both. The question may also be meaningless in helping persona achieve their goals.

- **Rating 3**: The question quality is good. The generated question is related to both the document and the target persona, but the connection is not very strong. The question is somewhat meaningful and can help the persona partially achieve one of their goals. The persona might ask the question, but not always.

- **Rating 4**: The question quality is very good. The generated question is closely related to both the document and the target persona. However, compared to the target persona, the question is more likely to be asked by one of OTHER PERSONAS.

- **Rating 5**: The question quality is excellent. The generated question is highly relevant to both the document and the target persona. The persona will definitely ask the question about the reference document. Compared to "OTHER PERSONAS", the question is more likely to be asked by the target persona.

For each question, conduct the evaluation as described above. If you provide score of 4, also reply which "other persona" is more likely to ask the question compared to the target persona; if you provide other scores, reply none for this. Your response should be in JSON format, with the question as the key and the score with other persona as the value.

Here is the target persona: $PERSONA$.

Here are the goals of the target persona: $GOALS$.

Here are the generated questions separated by semicolons: $QUESTIONS$.

Here are OTHER PERSONAS: $OTHER_PERSONA$.

Ensure that the key is an exact copy of the question and the score is between 1 and 5. Ensure the output follows a VALID JSON FORMAT!

Given the example questions: "Question A?; Question B?", the example output is:

```json
{
    "Question A?": [4, "other_persona"],
    "Question B?": [3, "None"]
}
```

The score you give for each question is:)";

constexpr std::string_view kCheckAnswerability =
    R"(You will be given a long document and several questions related to the document. Your task is to evaluate whether these questions can be answered based on the content of the document.

Here is the document: $DOCUMENT$

For each question:

1. If the document contains the answer, provide the answer and the exact reference text from the document. The answer should not be a direct copy from the original document. You should answer the question in your own words but refer to the document contents. The reference text should contain enough information to answer the question. If the reference texts contain different parts, concatenate every parts together.

2. If the document does not contain the answer, return "None" for both the answer and the reference.

You will be given several questions to evaluate. Conduct the task described above for each question. Your response should be in JSON format, with each question as the key and the answer and reference as the values.

Ensure that the key is an exact copy of the question and the reference is an exact copy of a text span in the given document. Ensure the output follows a VALID JSON FORMAT!

Example of two questions (the first question is answerable, while the second one is not answerable):

**Questions:**

1. Question 1?

2. Question 2?

**Answers:**

```json
{
    "Question 1?": { "Answer": "xxx", "Reference": "yyy" },
    "Question 2?": { "Answer": "None", "Reference": "None" },
}
```

**Questions:**
$QUESTIONS$

**Answers:**)";

// The example output keeps the original's unterminated "persona3 string.
constexpr std::string_view kPredictPersonas =
    R"(You will be given a summary of a document, one question and several personas. Your task is to conduct a multiple choice to choose the personas that might be interested in the given question that is related to the document. You should respond in a JSON format.

Here is an example. In  this example, four personas are given to you, and the persona3 is the most one to be interested in the question, while the persona2 is the second one. Persona1 and persona4 are not interested in the question. Example of the INPUT and OUTPUT:

**INPUT**:

**Document**: Document content.

**Question**: Question?

**Personas**: Persona1, persona2, persona3, persona4.

**OUTPUT**:

```json
{
    "order 1": "persona3,
    "order 2": "persona2"
}
```

**INPUT**:

**Document**: $DOCUMENT$

**Question**: $QUESTION$

**Personas** $PERSONA$

**OUTPUT**)";

constexpr std::string_view kLikertJudge =
    R"(Your job is to evaluate the quality of a question generated based on the text of a document. The purpose of the question is to serve as a "suggested question" next to the document in a "smart" document reader software, in order to help the reader (user of the document reader software) better navigate the document and provide the reader a better reading experience.

$METRIC_DEFINITION$

You will reply with one of the following options : 'Strongly Disagree', 'Disagree', 'Undecided', 'Agree', 'Strongly Agree'.

For example, given the question below:

Question: $SAMPLE_QUESTION$

If I were asked whether $METRIC_PHRASE$, I would reason as follows:
1. Reasoning : $SAMPLE_REASONING$.
2. Answer : $SAMPLE_ANSWER$


Below is the text of a document the reader is reading:
$DOCUMENT$

Below is the question:
$QUESTION$

Read the document's content and then think step by step about whether $METRIC_DECISION$ based on the document's content. Then make an evaluation decision based on your reasoning.

You must format your response as follows:
1. Reasoning: [Your reasoning here]
2. Answer: [choose one of 'Strongly Disagree', 'Disagree', 'Undecided', 'Agree', 'Strongly Agree'])";

constexpr std::string_view kSummarize =
    R"(Summarize the following document in at most $BUDGET$ words. Keep the main topics, the parties involved, and the key facts and figures. Reply with the summary text only.

Document:
$DOCUMENT$

Summary:)";

constexpr std::string_view kCompareQuestionSets =
    R"(You will be shown a document and two sets of suggested questions, Set A and Set B. The questions are shown to a reader at the very beginning of reading the document, to invite them into the document.

Judge which set is better. Prefer questions that are natural, attractive to a reader who has just opened the document, and answerable from the document. If both sets are equally good or equally bad, say so.

Document:
$DOCUMENT$

Set A:
$SET_A$

Set B:
$SET_B$

Reply in JSON format with a single key "verdict" whose value is one of "A", "B", or "tie".)";

bool is_name_char(char c) noexcept { return (c >= 'A' && c <= 'Z') || c == '_' || c == ' '; }

// Length of a placeholder name starting right after an opening '$', or 0.
std::size_t placeholder_length(std::string_view tmpl, std::size_t open) {
  const std::size_t close = tmpl.find('$', open + 1);
  if (close == std::string_view::npos || close == open + 1) return 0;
  const std::string_view name = tmpl.substr(open + 1, close - open - 1);
  if (name.front() < 'A' || name.front() > 'Z' || name.back() == ' ') return 0;
  if (!std::all_of(name.begin(), name.end(), is_name_char)) return 0;
  return name.size();
}

}  // namespace

std::string_view prompt_name(PromptId id) noexcept {
  switch (id) {
    case PromptId::GeneratePersonas: return "gen_personas";
    case PromptId::NormalizePersonas: return "normalize_personas";
    case PromptId::GenerateQuestions: return "gen_questions";
    case PromptId::ScoreGoals: return "score_goals";
    case PromptId::ScoreQuestions: return "score_questions";
    case PromptId::CheckAnswerability: return "check_answerability";
    case PromptId::PredictPersonas: return "predict_personas";
    case PromptId::LikertJudge: return "likert_judge";
    case PromptId::Summarize: return "summarize";
    case PromptId::CompareQuestionSets: return "compare_sets";
  }
  return "unknown";
}

std::string_view prompt_template(PromptId id) noexcept {
  switch (id) {
    case PromptId::GeneratePersonas: return kGeneratePersonas;
    case PromptId::NormalizePersonas: return kNormalizePersonas;
    case PromptId::GenerateQuestions: return kGenerateQuestions;
    case PromptId::ScoreGoals: return kScoreGoals;
    case PromptId::ScoreQuestions: return kScoreQuestions;
    case PromptId::CheckAnswerability: return kCheckAnswerability;
    case PromptId::PredictPersonas: return kPredictPersonas;
    case PromptId::LikertJudge: return kLikertJudge;
    case PromptId::Summarize: return kSummarize;
    case PromptId::CompareQuestionSets: return kCompareQuestionSets;
  }
  return {};
}

std::string render_template(std::string_view tmpl, const PromptVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const std::size_t open = tmpl.find('$', i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    const std::size_t len = placeholder_length(tmpl, open);
    if (len == 0) {
      out.push_back('$');
      i = open + 1;
      continue;
    }
    const std::string_view name = tmpl.substr(open + 1, len);
    auto it = vars.find(name);
    if (it == vars.end()) {
      fail(ErrorCode::UnsubstitutedPlaceholder, "no value for $" + std::string(name) + "$");
    }
    out.append(it->second);
    i = open + len + 2;
  }
  return out;
}

std::string render_prompt(PromptId id, const PromptVars& vars) {
  return render_template(prompt_template(id), vars);
}

std::vector<std::string> placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  std::size_t i = 0;
  while ((i = tmpl.find('$', i)) != std::string_view::npos) {
    const std::size_t len = placeholder_length(tmpl, i);
    if (len == 0) {
      ++i;
      continue;
    }
    std::string name(tmpl.substr(i + 1, len));
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
    i += len + 2;
  }
  return names;
}

std::string corrective_suffix(std::string_view problem) {
  return "\n\nYour previous response could not be used (" + std::string(problem) +
         "). Respond again following the requested output format exactly, without any additional text.";
}

const std::vector<JudgeMetricSpec>& judge_metrics() {
  static const std::vector<JudgeMetricSpec> metrics = {
      {"relevance",
       "Your job is to determine whether you believe the suggested question is relevant to the document. Higher "
       "relevance means that the question is about the topics, facts, or arguments that the document actually "
       "discusses.",
       "this question is relevant to the document",
       "the question is relevant to the document",
       "What were the main drivers of the increase in operating profit this year?",
       "The document is an annual report whose results section explains why operating profit rose, so the "
       "question targets exactly what the document discusses",
       "Strongly Agree"},
      {"readability",
       "Your job is to determine whether you believe the suggested question is easy to read. Higher readability "
       "means that the question is grammatical, concise, unambiguous, and can be understood at a glance.",
       "this question is easy to read",
       "the question is easy to read",
       "Regarding the aforementioned fiscal and the changes which in it were made, what and how did that happen "
       "to margins?",
       "The question is ungrammatical and its references are vague, so a reader has to reread it to guess its "
       "meaning",
       "Disagree"},
      {"importance",
       "Your job is to determine whether you believe the suggested question is important for the reader. Higher "
       "importance means that the answer covers central information the reader would want to know, rather than a "
       "peripheral detail.",
       "this question is important for the reader",
       "the question is important for the reader",
       "What font is used in the report's footnotes?",
       "The font of the footnotes is a peripheral detail that does not help the reader understand the content of "
       "the report",
       "Strongly Disagree"},
      {"answerability",
       "Your job is to determine whether you believe the suggested question can be answered from the information "
       "contained in the document. Higher answerability means that the question can be directly answered based on "
       "the content available in the document.",
       "this question is answerable",
       "the question can be answered",
       "How much revenue did the company report for the year?",
       "The income statement in the document lists the total revenue for the year, so the question can be "
       "answered directly",
       "Strongly Agree"},
  };
  return metrics;
}

const JudgeMetricSpec& judge_metric(std::string_view name) {
  for (const auto& m : judge_metrics()) {
    if (m.name == name) return m;
  }
  fail(ErrorCode::InvalidArgument, "unknown judge metric '" + std::string(name) + "'");
}

}  // namespace personasq
