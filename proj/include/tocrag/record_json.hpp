#pragma once

#include <json.hpp>

#include "tocrag/pipeline.hpp"

namespace tocrag {

nlohmann::ordered_json to_json(const AnswerRecord& record);
AnswerRecord answer_record_from_json(const nlohmann::json& j);

}  // namespace tocrag
