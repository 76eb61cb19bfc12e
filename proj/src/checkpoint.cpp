#include "cora/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cora {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'C', 'O', 'R', 'A'};

void put_u32(std::string& buf, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8)
        buf.push_back(static_cast<char>((v >> shift) & 0xffu));
}

void put_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int shift = 0; shift < 64; shift += 8)
        buf.push_back(static_cast<char>((bits >> shift) & 0xffu));
}

struct Cursor {
    const std::string& bytes;
    const std::string& origin;
    std::size_t at = 0;

    void need(std::size_t n, const char* what) {
        if (bytes.size() - at < n)
            throw std::runtime_error("checkpoint: truncated file " + origin + " (needed " +
                                     std::to_string(n) + " more bytes for " + what + ")");
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int shift = 0; shift < 32; shift += 8)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at++])) << shift;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t bits = 0;
        for (int shift = 0; shift < 64; shift += 8)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at++])) << shift;
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes.substr(at, n);
        at += n;
        return s;
    }
    bool done() const { return at == bytes.size(); }
};

json parse_header(const std::string& header_json) {
    json h = json::parse(header_json, nullptr, false);
    if (h.is_discarded())
        throw std::runtime_error("checkpoint: header is not valid JSON");
    return h;
}

const Matrix& find_block(const Checkpoint& c, const std::string& name) {
    for (const auto& [block_name, m] : c.blocks)
        if (block_name == name) return m;
    throw std::runtime_error("checkpoint: missing block \"" + name + "\"");
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
    if (m.rows() != rows || m.cols() != cols)
        throw std::runtime_error("checkpoint: block \"" + name + "\" has shape " + m.shape_str() +
                                 ", expected " + std::to_string(rows) + "x" +
                                 std::to_string(cols));
}

json dims_to_json(const ModelDims& dims) {
    return json{{"vocab_size", dims.vocab_size},
                {"d_model", dims.d_model},
                {"d_k", dims.d_k},
                {"d_ff", dims.d_ff},
                {"seq_len", dims.seq_len}};
}

ModelDims dims_from_json(const json& j) {
    ModelDims dims;
    dims.vocab_size = j.at("vocab_size").get<std::size_t>();
    dims.d_model = j.at("d_model").get<std::size_t>();
    dims.d_k = j.at("d_k").get<std::size_t>();
    dims.d_ff = j.at("d_ff").get<std::size_t>();
    dims.seq_len = j.at("seq_len").get<std::size_t>();
    return dims;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
    parse_header(c.header_json);  // reject malformed headers at write time
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kCheckpointVersion);
    put_u32(buf, static_cast<std::uint32_t>(c.header_json.size()));
    buf.append(c.header_json);
    for (const auto& [name, m] : c.blocks) {
        if (name.empty()) throw std::invalid_argument("checkpoint: empty block name");
        if (m.empty()) throw std::invalid_argument("checkpoint: empty block \"" + name + "\"");
        put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf.append(name);
        put_u32(buf, static_cast<std::uint32_t>(m.rows()));
        put_u32(buf, static_cast<std::uint32_t>(m.cols()));
        for (double v : m.data()) put_f64(buf, v);
    }
    return buf;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin) {
    Cursor cur{bytes, origin};
    const std::string magic = cur.str(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + origin);
    const std::uint32_t version = cur.u32("version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " (expected " + std::to_string(kCheckpointVersion) + ") in " +
                                 origin);
    Checkpoint c;
    const std::uint32_t header_len = cur.u32("header length");
    c.header_json = cur.str(header_len, "header");
    parse_header(c.header_json);

    while (!cur.done()) {
        const std::uint32_t name_len = cur.u32("block name length");
        const std::string name = cur.str(name_len, "block name");
        const std::uint32_t rows = cur.u32("block rows");
        const std::uint32_t cols = cur.u32("block cols");
        if (rows == 0 || cols == 0)
            throw std::runtime_error("checkpoint: block \"" + name + "\" has zero dimension in " +
                                     origin);
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(rows) * cols);
        for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i)
            data.push_back(cur.f64("block payload"));
        c.blocks.emplace_back(name, Matrix(rows, cols, std::move(data)));
    }
    return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    const std::string bytes = encode_checkpoint(c);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes, path);
}

Checkpoint model_to_checkpoint(const ToyTransformer& model, const std::string& label) {
    json header;
    header["kind"] = "model";
    header["label"] = label;
    header["dims"] = dims_to_json(model.dims);
    if (model.adapter) {
        const Adapter& ad = *model.adapter;
        header["adapter"] = json{{"rank", ad.rank},
                                 {"scale", ad.scale},
                                 {"b_frozen", ad.b_frozen},
                                 {"init_mode", to_string(ad.init_mode)},
                                 {"seed", ad.seed}};
    }
    Checkpoint c;
    c.header_json = header.dump();
    c.blocks.emplace_back("embed", model.embed);
    c.blocks.emplace_back("attn_w0", model.attn.stacked());
    c.blocks.emplace_back("ffn_w1", model.ffn_w1);
    c.blocks.emplace_back("ffn_w2", model.ffn_w2);
    c.blocks.emplace_back("out_proj", model.out_proj);
    if (model.adapter) {
        c.blocks.emplace_back("adapter_a", model.adapter->a);
        c.blocks.emplace_back("adapter_b", model.adapter->b);
    }
    return c;
}

ToyTransformer model_from_checkpoint(const Checkpoint& c) {
    json header = parse_header(c.header_json);
    if (header.value("kind", "") != "model")
        throw std::runtime_error("checkpoint: header kind \"" +
                                 header.value("kind", std::string("<missing>")) +
                                 "\" is not a model");
    ToyTransformer model;
    model.dims = dims_from_json(header.at("dims"));

    model.embed = find_block(c, "embed");
    expect_shape(model.embed, model.dims.vocab_size, model.dims.d_model, "embed");
    Matrix w0 = find_block(c, "attn_w0");
    expect_shape(w0, 3 * model.dims.d_model, model.dims.d_k, "attn_w0");
    model.attn = StackedAttentionWeights::from_stacked(std::move(w0));
    model.ffn_w1 = find_block(c, "ffn_w1");
    expect_shape(model.ffn_w1, model.dims.d_k, model.dims.d_ff, "ffn_w1");
    model.ffn_w2 = find_block(c, "ffn_w2");
    expect_shape(model.ffn_w2, model.dims.d_ff, model.dims.d_model, "ffn_w2");
    model.out_proj = find_block(c, "out_proj");
    expect_shape(model.out_proj, model.dims.d_model, model.dims.vocab_size, "out_proj");

    if (header.contains("adapter")) {
        const json& aj = header.at("adapter");
        Adapter ad;
        ad.rank = aj.at("rank").get<std::size_t>();
        ad.scale = aj.at("scale").get<double>();
        ad.b_frozen = aj.at("b_frozen").get<bool>();
        ad.init_mode = init_mode_from_string(aj.at("init_mode").get<std::string>());
        ad.seed = aj.at("seed").get<std::uint64_t>();
        ad.a = find_block(c, "adapter_a");
        expect_shape(ad.a, 3 * model.dims.d_model, ad.rank, "adapter_a");
        ad.b = find_block(c, "adapter_b");
        expect_shape(ad.b, ad.rank, model.dims.d_k, "adapter_b");
        model.adapter = std::move(ad);
    }
    return model;
}

Checkpoint basis_to_checkpoint(const CommonBasis& basis, const std::string& label) {
    json header;
    header["kind"] = "basis";
    header["label"] = label;
    header["method"] = to_string(basis.method);
    header["rank"] = basis.rank;
    header["variance_captured"] = basis.variance_captured;
    Checkpoint c;
    c.header_json = header.dump();
    c.blocks.emplace_back("b", basis.b);
    return c;
}

std::string checkpoint_csv(const Checkpoint& c) {
    std::string out = "block,row,col,value\n";
    char buf[96];
    for (const auto& [name, m] : c.blocks) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.17g\n", name.c_str(), i, j,
                              m(i, j));
                out += buf;
            }
        }
    }
    return out;
}

CommonBasis basis_from_checkpoint(const Checkpoint& c) {
    json header = parse_header(c.header_json);
    if (header.value("kind", "") != "basis")
        throw std::runtime_error("checkpoint: header kind \"" +
                                 header.value("kind", std::string("<missing>")) +
                                 "\" is not a basis");
    CommonBasis basis;
    basis.method = basis_method_from_string(header.at("method").get<std::string>());
    basis.rank = header.at("rank").get<std::size_t>();
    basis.variance_captured = header.at("variance_captured").get<double>();
    basis.b = find_block(c, "b");
    if (basis.b.rows() != basis.rank)
        throw std::runtime_error("checkpoint: basis block has " + std::to_string(basis.b.rows()) +
                                 " rows, header says rank " + std::to_string(basis.rank));
    return basis;
}

}  // namespace cora
