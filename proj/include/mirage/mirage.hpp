#pragma once

// Umbrella header: embedding-space image attacks plus the hallucination
// evaluation harness around them.

#include "mirage/attack/adam.hpp"
#include "mirage/attack/attack.hpp"
#include "mirage/dataset/manifest.hpp"
#include "mirage/dataset/sampling.hpp"
#include "mirage/errors.hpp"
#include "mirage/eval/evaluate.hpp"
#include "mirage/eval/prompts.hpp"
#include "mirage/eval/question.hpp"
#include "mirage/eval/rates.hpp"
#include "mirage/eval/verdict.hpp"
#include "mirage/image.hpp"
#include "mirage/io/image_io.hpp"
#include "mirage/metrics/image.hpp"
#include "mirage/metrics/stats.hpp"
#include "mirage/metrics/text.hpp"
#include "mirage/models/chat_client.hpp"
#include "mirage/models/encoder.hpp"
#include "mirage/models/fixture_clients.hpp"
#include "mirage/models/http_chat_client.hpp"
#include "mirage/models/model_ops.hpp"
#include "mirage/models/remote_encoder.hpp"
#include "mirage/models/replay.hpp"
#include "mirage/models/toy_encoder.hpp"
#include "mirage/pipeline/config.hpp"
#include "mirage/pipeline/demo.hpp"
#include "mirage/pipeline/report.hpp"
#include "mirage/pipeline/run.hpp"
#include "mirage/pipeline/transform.hpp"
#include "mirage/version.hpp"
