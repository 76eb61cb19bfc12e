#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cora {

// Synthetic sequence-to-sequence tasks over a small integer vocabulary.
// The last vocabulary id is reserved as the separator token; data tokens
// live in [0, vocab_size - 2].
enum class TaskKind { copy, reverse, modular_add, sort_tokens, copy_offset };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

struct TaskSpec {
    TaskKind kind = TaskKind::copy;
    std::size_t vocab_size = 0;
    std::size_t input_len = 0;

    bool operator==(const TaskSpec&) const = default;
};

void validate_task_spec(const TaskSpec& spec);

int separator_token(const TaskSpec& spec);

// Number of target tokens a well-formed sample carries.
std::size_t target_length(const TaskSpec& spec);

// Fed sequence length: input, separator, and all but the last target token.
std::size_t packed_length(const TaskSpec& spec);

// tokens:  input ++ separator ++ target[0 .. t-2]
// targets: -1 everywhere except positions that predict a target token.
struct Sample {
    std::vector<int> tokens;
    std::vector<int> targets;
};

// Deterministic packing of one input tuple into a training sample.
Sample make_sample(const TaskSpec& spec, const std::vector<int>& input);

// The ground-truth output tokens for one input tuple.
std::vector<int> task_target(const TaskSpec& spec, const std::vector<int>& input);

enum class Split { train, eval };

std::string to_string(Split split);

// True when the input tuple belongs to the split. Membership is a pure
// function of the input, so train and eval never share an input.
bool in_split(const std::vector<int>& input, Split split);

class Rng;

// One sample from the stream: inputs are drawn uniformly and rejected until
// one lands in the requested split.
Sample draw_sample(const TaskSpec& spec, Split split, Rng& rng);

struct Dataset {
    TaskSpec spec;
    std::vector<Sample> samples;
};

// Samples input tuples uniformly (with replacement) from the requested
// split. Draw order depends only on the seed.
Dataset generate_dataset(const TaskSpec& spec, std::size_t count, Split split,
                         std::uint64_t seed);

}  // namespace cora
