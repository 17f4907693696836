#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "lambda_lab/cli.hpp"
#include "lambda_lab/error.hpp"

namespace lambda_lab::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + file.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

// No timestamps or host data: two identical runs give identical manifests.
void write_manifest(const fs::path& dir, const std::string& command) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
    return fs::relative(a, dir).generic_string() < fs::relative(b, dir).generic_string();
  });
  nlohmann::json j;
  j["command"] = command;
  j["files"] = nlohmann::json::array();
  for (const auto& f : files)
    j["files"].push_back({{"path", fs::relative(f, dir).generic_string()},
                          {"bytes", fs::file_size(f)},
                          {"sha256", sha256_hex(f)}});
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

}  // namespace lambda_lab::cli
