#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "radarseg4d/config.hpp"
#include "radarseg4d/network.hpp"

namespace fs = std::filesystem;

namespace radarseg4d {

namespace {

constexpr char kMagic[8] = {'T', 'M', 'V', 'A', '4', 'D', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::string& out, U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out.append(buf, sizeof(U));
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    template <typename U>
    U get() {
        need(sizeof(U));
        U v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
        pos_ += sizeof(U);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void floats(float* dst, std::size_t n) {
        need(n * sizeof(float));
        std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    }
    std::string bytes_;
    std::size_t pos_ = 0;
};

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Header {
    std::uint64_t digest = 0;
    NetworkConfig config;
};

Header read_header(Reader& r) {
    const std::string magic = r.str(sizeof kMagic);
    if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint file");
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Header h;
    h.digest = r.get<std::uint64_t>();
    const std::string text = r.str(r.get<std::uint32_t>());
    try {
        h.config = nlohmann::json::parse(text).get<NetworkConfig>();
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("bad checkpoint config: ") + e.what());
    }
    if (config_digest(h.config) != h.digest) throw CheckpointError("checkpoint config digest mismatch");
    return h;
}

}  // namespace

std::string config_canonical_json(const NetworkConfig& cfg) { return nlohmann::json(cfg).dump(); }

std::uint64_t config_digest(const NetworkConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config_canonical_json(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string serialize_checkpoint(const Tmva4d<float>& model) {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, config_digest(model.config()));
    const std::string text = config_canonical_json(model.config());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    const auto& params = model.params();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params.entries()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t d : p.value.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.append(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(float));
    }
    return out;
}

void save_checkpoint(const fs::path& path, const Tmva4d<float>& model) {
    const std::string bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
}

NetworkConfig read_checkpoint_config(const fs::path& path) {
    Reader r(read_all(path));
    return read_header(r).config;
}

void load_checkpoint(const fs::path& path, Tmva4d<float>& model) {
    Reader r(read_all(path));
    const Header h = read_header(r);
    if (h.config != model.config() || h.digest != config_digest(model.config())) {
        throw CheckpointError("checkpoint config does not match the model config");
    }
    auto& params = model.params();
    const auto count = r.get<std::uint32_t>();
    if (count != params.size()) throw CheckpointError("checkpoint parameter count mismatch");
    for (auto& p : params.entries()) {
        const std::string name = r.str(r.get<std::uint32_t>());
        if (name != p.name) throw CheckpointError("checkpoint parameter '" + name + "' where '" + p.name + "' expected");
        Shape shape(r.get<std::uint32_t>());
        for (auto& d : shape) d = r.get<std::uint32_t>();
        if (shape != p.value.shape()) {
            throw CheckpointError(name + ": shape " + shape_string(shape) + " differs from " +
                                  shape_string(p.value.shape()));
        }
        r.floats(p.value.data(), p.value.size());
    }
    if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
}

}  // namespace radarseg4d
