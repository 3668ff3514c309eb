#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace satsplit {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Bytes concat(std::initializer_list<ByteView> parts);

// Primitive wrappers over OpenSSL libcrypto.
namespace crypto {

Digest sha256(ByteView data);
Digest hmac_sha256(ByteView key, ByteView data);

/// HKDF (RFC 5869) over SHA-256.
Digest hkdf_extract(ByteView salt, ByteView ikm);
Bytes hkdf_expand(ByteView prk, ByteView info, std::size_t length);

/// AES-128-GCM with a 16-octet tag appended to the ciphertext.
Bytes aes128gcm_seal(ByteView key, ByteView nonce, ByteView plaintext);
/// Throws AuthenticationFailure on tag mismatch.
Bytes aes128gcm_open(ByteView key, ByteView nonce, ByteView sealed);

/// OS entropy via the libcrypto DRBG.
Bytes random_bytes(std::size_t n);

}  // namespace crypto

std::string to_hex(ByteView data);
/// Throws InvalidParameter on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);
/// Unpadded base64url as used in RFC 8188 examples; padding is tolerated.
Bytes from_base64url(std::string_view text);
std::string to_base64url(ByteView data);

}  // namespace satsplit
