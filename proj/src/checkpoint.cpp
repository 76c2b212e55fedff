#include "sa/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sa {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'C', 'K'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint integrity error: unexpected end of file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in) {
    const std::uint64_t lo = read_u32(in);
    const std::uint64_t hi = read_u32(in);
    return lo | (hi << 32);
}

std::string serialize_config(const std::map<std::string, std::string>& config) {
    std::ostringstream out;
    for (const auto& [k, v] : config) out << k << '=' << v << '\n';
    return out.str();
}

std::map<std::string, std::string> parse_config(const std::string& blob) {
    std::map<std::string, std::string> config;
    std::istringstream in(blob);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("checkpoint config: malformed line '" + line + "'");
        config[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return config;
}

}  // namespace

const std::string& Checkpoint::get(const std::string& key) const {
    auto it = config.find(key);
    if (it == config.end())
        throw std::runtime_error("checkpoint: missing config key '" + key + "'");
    return it->second;
}

void Checkpoint::add_tensor(const std::string& name, const Tensor& t) {
    tensor_shapes.emplace_back(name, t->shape);
    std::vector<float> vals(t->values.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(t->values[i]);
    tensor_values.push_back(std::move(vals));
}

void Checkpoint::save(const std::string& path) const {
    std::ostringstream payload;
    const std::string blob = serialize_config(config);
    write_u32(payload, static_cast<std::uint32_t>(blob.size()));
    payload.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    write_u32(payload, static_cast<std::uint32_t>(tensor_shapes.size()));
    for (std::size_t i = 0; i < tensor_shapes.size(); ++i) {
        const auto& [name, shape] = tensor_shapes[i];
        write_u32(payload, static_cast<std::uint32_t>(name.size()));
        payload.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(payload, static_cast<std::uint32_t>(shape.size()));
        for (int d : shape) write_u32(payload, static_cast<std::uint32_t>(d));
        for (float v : tensor_values[i]) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            write_u32(payload, bits);
        }
    }
    const std::string body = payload.str();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u64(out, body.size());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    const std::uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint version mismatch: found " + std::to_string(version) +
                                 ", expected " + std::to_string(kVersion));
    const std::uint64_t body_len = read_u64(in);
    const std::streampos body_start = in.tellg();
    in.seekg(0, std::ios::end);
    const std::uint64_t actual = static_cast<std::uint64_t>(in.tellg() - body_start);
    if (actual != body_len)
        throw std::runtime_error("checkpoint integrity error: payload is " +
                                 std::to_string(actual) + " bytes, header declares " +
                                 std::to_string(body_len));
    in.seekg(body_start);

    Checkpoint ckpt;
    const std::uint32_t blob_len = read_u32(in);
    std::string blob(blob_len, '\0');
    in.read(blob.data(), blob_len);
    if (!in) throw std::runtime_error("checkpoint integrity error: truncated config blob");
    ckpt.config = parse_config(blob);

    const std::uint32_t count = read_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw std::runtime_error("checkpoint integrity error: truncated tensor name");
        const std::uint32_t rank = read_u32(in);
        std::vector<int> shape;
        std::int64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int>(read_u32(in)));
            n *= shape.back();
        }
        std::vector<float> vals(static_cast<std::size_t>(n));
        for (auto& v : vals) {
            const std::uint32_t bits = read_u32(in);
            std::memcpy(&v, &bits, 4);
        }
        ckpt.tensor_shapes.emplace_back(std::move(name), std::move(shape));
        ckpt.tensor_values.push_back(std::move(vals));
    }
    return ckpt;
}

void restore_params(const Checkpoint& ckpt, const ParamStore& params) {
    if (ckpt.tensor_shapes.size() != params.items().size())
        throw std::runtime_error("checkpoint validation: tensor count " +
                                 std::to_string(ckpt.tensor_shapes.size()) + " vs expected " +
                                 std::to_string(params.items().size()));
    for (std::size_t i = 0; i < ckpt.tensor_shapes.size(); ++i) {
        const auto& [name, shape] = ckpt.tensor_shapes[i];
        const auto& [expected_name, tensor] = params.items()[i];
        if (name != expected_name)
            throw std::runtime_error("checkpoint validation: tensor '" + name +
                                     "' where '" + expected_name + "' was expected");
        if (shape != tensor->shape)
            throw std::runtime_error("checkpoint validation: tensor '" + name + "' has shape " +
                                     shape_to_string(shape) + ", expected " +
                                     shape_to_string(tensor->shape));
        const auto& vals = ckpt.tensor_values[i];
        for (std::size_t j = 0; j < vals.size(); ++j)
            tensor->values[j] = static_cast<double>(vals[j]);
    }
}

Checkpoint snapshot_params(const ParamStore& params) {
    Checkpoint ckpt;
    for (const auto& [name, tensor] : params.items()) ckpt.add_tensor(name, tensor);
    return ckpt;
}

}  // namespace sa
