// Copyright 2026 The Faultline Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FAULTLINE_TLS_H_
#define FAULTLINE_TLS_H_

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

#include <openssl/evp.h>
#include <openssl/ssl.h>
#include <openssl/x509.h>

#include "faultline/net.h"

namespace faultline::tls {

class TlsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct X509Deleter {
  void operator()(X509* x) const { X509_free(x); }
};
struct PkeyDeleter {
  void operator()(EVP_PKEY* k) const { EVP_PKEY_free(k); }
};
struct SslCtxDeleter {
  void operator()(SSL_CTX* c) const { SSL_CTX_free(c); }
};
using X509Ptr = std::unique_ptr<X509, X509Deleter>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using SslCtxPtr = std::unique_ptr<SSL_CTX, SslCtxDeleter>;

PkeyPtr generate_ec_key();
std::string to_pem(X509* cert);
std::string to_pem(EVP_PKEY* key);
X509Ptr cert_from_pem(std::string_view pem);
PkeyPtr key_from_pem(std::string_view pem);

// DNS name (letters, digits, '-', '_' labels of <= 63 bytes, <= 253 total)
// or an IPv4/IPv6 literal (brackets allowed).
bool is_valid_hostname(std::string_view host);
bool is_ip_literal(std::string_view host);

// Leaf certificate plus the key it was issued for.
struct LeafCertificate {
  X509Ptr cert;
  std::shared_ptr<EVP_PKEY> key;

  std::string cert_pem() const { return to_pem(cert.get()); }
  std::string serial_hex() const;
};

// Self-signed signing authority used to mint interception certificates.
class CertificateAuthority {
 public:
  static constexpr int kDefaultValidityDays = 365;

  static CertificateAuthority generate(int validity_days = kDefaultValidityDays,
                                       std::string_view common_name = "faultline interception CA");
  static CertificateAuthority from_pem(std::string_view cert_pem, std::string_view key_pem);
  // Loads the pair when both files exist; otherwise generates and writes
  // them (key with mode 0600). Throws TlsError on any filesystem failure.
  static CertificateAuthority load_or_create(const std::filesystem::path& cert_path,
                                             const std::filesystem::path& key_path,
                                             int validity_days = kDefaultValidityDays);

  void write(const std::filesystem::path& cert_path,
             const std::filesystem::path& key_path) const;

  // Issues a certificate for hostname (SAN dNSName or iPAddress, CN too).
  // Throws TlsError on an invalid hostname.
  LeafCertificate mint_leaf(std::string_view hostname,
                            std::shared_ptr<EVP_PKEY> leaf_key) const;

  const std::string& cert_pem() const { return cert_pem_; }
  const std::string& key_pem() const { return key_pem_; }
  X509* cert() const { return cert_.get(); }
  EVP_PKEY* key() const { return key_.get(); }

 private:
  CertificateAuthority(X509Ptr cert, PkeyPtr key);

  std::shared_ptr<X509> cert_;
  std::shared_ptr<EVP_PKEY> key_;
  std::string cert_pem_;
  std::string key_pem_;
};

// Per-hostname leaf cache; leaves live for the cache's lifetime and share
// one key pair.
class LeafCache {
 public:
  explicit LeafCache(std::shared_ptr<const CertificateAuthority> ca);

  std::shared_ptr<const LeafCertificate> get(std::string_view hostname);
  std::size_t size() const;
  const CertificateAuthority& authority() const { return *ca_; }

 private:
  std::shared_ptr<const CertificateAuthority> ca_;
  std::shared_ptr<EVP_PKEY> leaf_key_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const LeafCertificate>, std::less<>> leaves_;
};

class TlsStream : public net::Stream {
 public:
  TlsStream(net::Socket socket, SSL* ssl) : socket_(std::move(socket)), ssl_(ssl) {}
  ~TlsStream() override;
  TlsStream(const TlsStream&) = delete;
  TlsStream& operator=(const TlsStream&) = delete;

  std::size_t read_some(std::span<char> buffer) override;
  void write_all(std::string_view data) override;
  void shutdown_write() override;
  const net::Socket& socket() const override { return socket_; }
  bool has_pending() const override;

  std::string sni() const;

 private:
  net::Socket socket_;
  SSL* ssl_;
  bool shutdown_sent_ = false;
};

// Client-facing side of split TLS: presents a leaf minted for the SNI name,
// falling back to the CONNECT host when the client sends no SNI.
class InterceptionContext {
 public:
  explicit InterceptionContext(std::shared_ptr<LeafCache> leaves);

  // Performs the server handshake. Throws TlsError on failure.
  std::unique_ptr<TlsStream> accept(net::Socket socket, std::string_view fallback_host);
  LeafCache& leaves() { return *leaves_; }

 private:
  static int on_servername(SSL* ssl, int* alert, void* arg);

  std::shared_ptr<LeafCache> leaves_;
  SslCtxPtr ctx_;
};

struct UpstreamTlsOptions {
  bool verify = true;
  std::string extra_ca_path;  // PEM bundle trusted in addition to system roots
};

// Origin-facing side: verifies chain and hostname unless disabled.
class UpstreamContext {
 public:
  explicit UpstreamContext(const UpstreamTlsOptions& options);

  std::unique_ptr<TlsStream> connect(net::Socket socket, std::string_view hostname);

 private:
  UpstreamTlsOptions options_;
  SslCtxPtr ctx_;
};

}  // namespace faultline::tls

#endif  // FAULTLINE_TLS_H_
