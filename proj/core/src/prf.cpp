#include "pdml/prf.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>

namespace pdml {

struct Aes128Prf::Impl {
  EVP_CIPHER_CTX* ctx = nullptr;
};

Aes128Prf::Aes128Prf(const std::array<std::uint8_t, 16>& key)
    : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_CIPHER_CTX_new();
  if (!impl_->ctx) throw std::runtime_error("Aes128Prf: context allocation failed");
  if (EVP_EncryptInit_ex(impl_->ctx, EVP_aes_128_ecb(), nullptr, key.data(),
                         nullptr) != 1) {
    EVP_CIPHER_CTX_free(impl_->ctx);
    throw std::runtime_error("Aes128Prf: cipher init failed");
  }
  EVP_CIPHER_CTX_set_padding(impl_->ctx, 0);
}

Aes128Prf::~Aes128Prf() {
  if (impl_ && impl_->ctx) EVP_CIPHER_CTX_free(impl_->ctx);
}

Aes128Prf::Aes128Prf(Aes128Prf&&) noexcept = default;
Aes128Prf& Aes128Prf::operator=(Aes128Prf&&) noexcept = default;

std::uint64_t Aes128Prf::word(std::uint64_t invocation,
                              std::uint64_t component) const {
  std::uint8_t block[16];
  std::memcpy(block, &invocation, 8);
  std::memcpy(block + 8, &component, 8);
  std::uint8_t out[32];
  int outlen = 0;
  if (EVP_EncryptUpdate(impl_->ctx, out, &outlen, block, 16) != 1 || outlen < 16) {
    throw std::runtime_error("Aes128Prf: encryption failed");
  }
  std::uint64_t w;
  std::memcpy(&w, out, 8);
  return w;
}

}  // namespace pdml
