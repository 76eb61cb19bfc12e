#include "cora/tasks.hpp"

#include <algorithm>
#include <stdexcept>

#include "cora/rng.hpp"

namespace cora {
namespace {

std::uint64_t fnv1a(const std::vector<int>& input) {
    std::uint64_t h = 1469598103934665603ull;
    for (int v : input) {
        auto u = static_cast<std::uint32_t>(v);
        for (int shift = 0; shift < 32; shift += 8) {
            h ^= (u >> shift) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    return h;
}

}  // namespace

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::copy: return "copy";
        case TaskKind::reverse: return "reverse";
        case TaskKind::modular_add: return "modular_add";
        case TaskKind::sort_tokens: return "sort_tokens";
        case TaskKind::copy_offset: return "copy_offset";
    }
    throw std::logic_error("to_string: unknown TaskKind");
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "copy") return TaskKind::copy;
    if (name == "reverse") return TaskKind::reverse;
    if (name == "modular_add") return TaskKind::modular_add;
    if (name == "sort_tokens") return TaskKind::sort_tokens;
    if (name == "copy_offset") return TaskKind::copy_offset;
    throw std::invalid_argument("unknown task kind \"" + name +
                                "\" (expected copy, reverse, modular_add, sort_tokens, or "
                                "copy_offset)");
}

std::string to_string(Split split) {
    return split == Split::train ? "train" : "eval";
}

void validate_task_spec(const TaskSpec& spec) {
    if (spec.vocab_size < 3)
        throw std::invalid_argument("task " + to_string(spec.kind) +
                                    ": vocab_size must be >= 3 (at least two data tokens plus "
                                    "the separator), got " +
                                    std::to_string(spec.vocab_size));
    if (spec.input_len == 0)
        throw std::invalid_argument("task " + to_string(spec.kind) +
                                    ": input_len must be positive");
    if (spec.kind == TaskKind::modular_add && spec.input_len != 2)
        throw std::invalid_argument("task modular_add: input_len must be 2 (two operands), got " +
                                    std::to_string(spec.input_len));
}

int separator_token(const TaskSpec& spec) {
    return static_cast<int>(spec.vocab_size) - 1;
}

std::size_t target_length(const TaskSpec& spec) {
    return spec.kind == TaskKind::modular_add ? 1 : spec.input_len;
}

std::size_t packed_length(const TaskSpec& spec) {
    return spec.input_len + target_length(spec);
}

std::vector<int> task_target(const TaskSpec& spec, const std::vector<int>& input) {
    validate_task_spec(spec);
    if (input.size() != spec.input_len)
        throw std::invalid_argument("task_target: input length " + std::to_string(input.size()) +
                                    " does not match input_len " +
                                    std::to_string(spec.input_len));
    const int data_vocab = static_cast<int>(spec.vocab_size) - 1;
    for (int v : input)
        if (v < 0 || v >= data_vocab)
            throw std::invalid_argument("task_target: input token " + std::to_string(v) +
                                        " outside data range [0, " +
                                        std::to_string(data_vocab - 1) + "]");
    switch (spec.kind) {
        case TaskKind::copy:
            return input;
        case TaskKind::reverse: {
            std::vector<int> out(input.rbegin(), input.rend());
            return out;
        }
        case TaskKind::modular_add:
            return {(input[0] + input[1]) % data_vocab};
        case TaskKind::sort_tokens: {
            std::vector<int> out = input;
            std::sort(out.begin(), out.end());
            return out;
        }
        case TaskKind::copy_offset: {
            std::vector<int> out(input.size());
            for (std::size_t i = 0; i < input.size(); ++i)
                out[i] = (input[i] + 1) % data_vocab;
            return out;
        }
    }
    throw std::logic_error("task_target: unknown TaskKind");
}

Sample make_sample(const TaskSpec& spec, const std::vector<int>& input) {
    const std::vector<int> target = task_target(spec, input);
    const std::size_t fed = packed_length(spec);

    Sample sample;
    sample.tokens.reserve(fed);
    sample.tokens.insert(sample.tokens.end(), input.begin(), input.end());
    sample.tokens.push_back(separator_token(spec));
    sample.tokens.insert(sample.tokens.end(), target.begin(), target.end() - 1);

    sample.targets.assign(fed, -1);
    for (std::size_t i = 0; i < target.size(); ++i)
        sample.targets[spec.input_len + i] = target[i];
    return sample;
}

bool in_split(const std::vector<int>& input, Split split) {
    const bool is_eval = fnv1a(input) % 4 == 0;
    return split == Split::eval ? is_eval : !is_eval;
}

Sample draw_sample(const TaskSpec& spec, Split split, Rng& rng) {
    const auto data_vocab = static_cast<std::uint64_t>(spec.vocab_size - 1);
    std::vector<int> input(spec.input_len);
    while (true) {
        for (auto& v : input) v = static_cast<int>(rng.uniform_int(data_vocab));
        if (in_split(input, split)) return make_sample(spec, input);
    }
}

Dataset generate_dataset(const TaskSpec& spec, std::size_t count, Split split,
                         std::uint64_t seed) {
    validate_task_spec(spec);
    if (count == 0) throw std::invalid_argument("generate_dataset: count must be positive");

    Rng rng(seed);
    Dataset ds;
    ds.spec = spec;
    ds.samples.reserve(count);
    while (ds.samples.size() < count) ds.samples.push_back(draw_sample(spec, split, rng));
    return ds;
}

}  // namespace cora
