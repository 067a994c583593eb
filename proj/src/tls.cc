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

#include "faultline/tls.h"

#include <arpa/inet.h>
#include <sys/socket.h>
#include <sys/stat.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/bn.h>
#include <openssl/err.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/x509v3.h>
#include <spdlog/spdlog.h>

namespace faultline::tls {

namespace {

struct BioDeleter {
  void operator()(BIO* b) const { BIO_free(b); }
};
using BioPtr = std::unique_ptr<BIO, BioDeleter>;

std::string last_ssl_error() {
  const unsigned long err = ERR_get_error();
  if (err == 0) return "unknown TLS error";
  char buf[256];
  ERR_error_string_n(err, buf, sizeof(buf));
  ERR_clear_error();
  return buf;
}

[[noreturn]] void fail(std::string_view what) {
  throw TlsError(std::string(what) + ": " + last_ssl_error());
}

std::string bio_to_string(BIO* bio) {
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio, &data);
  return std::string(data, static_cast<std::size_t>(len));
}

void set_random_serial(X509* cert) {
  unsigned char bytes[16];
  if (RAND_bytes(bytes, sizeof(bytes)) != 1) fail("RAND_bytes");
  bytes[0] &= 0x7f;  // keep the serial positive
  std::unique_ptr<BIGNUM, decltype(&BN_free)> bn(BN_bin2bn(bytes, sizeof(bytes), nullptr),
                                                 BN_free);
  if (!bn || BN_to_ASN1_INTEGER(bn.get(), X509_get_serialNumber(cert)) == nullptr) {
    fail("serial");
  }
}

void add_ext(X509* cert, X509* issuer, int nid, const char* value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
  X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
  if (ext == nullptr) fail("X509V3_EXT_conf_nid");
  const int ok = X509_add_ext(cert, ext, -1);
  X509_EXTENSION_free(ext);
  if (ok != 1) fail("X509_add_ext");
}

std::string strip_brackets(std::string_view host) {
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
    return std::string(host.substr(1, host.size() - 2));
  }
  return std::string(host);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& data, bool secret) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TlsError("cannot write " + path.string() + ": " + std::strerror(errno));
  out << data;
  out.close();
  if (!out) throw TlsError("cannot write " + path.string());
  if (secret) ::chmod(path.c_str(), 0600);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TlsError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PkeyPtr generate_ec_key() {
  PkeyPtr key(EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256"));
  if (!key) fail("EC key generation");
  return key;
}

std::string to_pem(X509* cert) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_X509(bio.get(), cert) != 1) fail("PEM_write_bio_X509");
  return bio_to_string(bio.get());
}

std::string to_pem(EVP_PKEY* key) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_PrivateKey(bio.get(), key, nullptr, nullptr, 0, nullptr,
                                       nullptr) != 1) {
    fail("PEM_write_bio_PrivateKey");
  }
  return bio_to_string(bio.get());
}

X509Ptr cert_from_pem(std::string_view pem) {
  BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  X509Ptr cert(PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr));
  if (!cert) fail("PEM_read_bio_X509");
  return cert;
}

PkeyPtr key_from_pem(std::string_view pem) {
  BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  PkeyPtr key(PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr));
  if (!key) fail("PEM_read_bio_PrivateKey");
  return key;
}

bool is_ip_literal(std::string_view host) {
  const std::string h = strip_brackets(host);
  unsigned char buf[sizeof(in6_addr)];
  return inet_pton(AF_INET, h.c_str(), buf) == 1 || inet_pton(AF_INET6, h.c_str(), buf) == 1;
}

bool is_valid_hostname(std::string_view host) {
  if (host.empty()) return false;
  if (is_ip_literal(host)) return true;
  if (host.back() == '.') host.remove_suffix(1);
  if (host.empty() || host.size() > 253) return false;
  std::size_t label_len = 0;
  for (std::size_t i = 0; i < host.size(); ++i) {
    const char c = host[i];
    if (c == '.') {
      if (label_len == 0 || host[i - 1] == '-') return false;
      label_len = 0;
      continue;
    }
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_';
    if (!ok) return false;
    if (label_len == 0 && c == '-') return false;
    if (++label_len > 63) return false;
  }
  return label_len > 0 && host.back() != '-';
}

std::string LeafCertificate::serial_hex() const {
  std::unique_ptr<BIGNUM, decltype(&BN_free)> bn(
      ASN1_INTEGER_to_BN(X509_get0_serialNumber(cert.get()), nullptr), BN_free);
  char* hex = BN_bn2hex(bn.get());
  std::string out(hex);
  OPENSSL_free(hex);
  return out;
}

CertificateAuthority::CertificateAuthority(X509Ptr cert, PkeyPtr key)
    : cert_(cert.release(), X509_free), key_(key.release(), EVP_PKEY_free) {
  cert_pem_ = to_pem(cert_.get());
  key_pem_ = to_pem(key_.get());
}

CertificateAuthority CertificateAuthority::generate(int validity_days,
                                                    std::string_view common_name) {
  if (validity_days <= 0) throw TlsError("CA validity must be positive");
  PkeyPtr key = generate_ec_key();
  X509Ptr cert(X509_new());
  if (!cert) fail("X509_new");
  X509_set_version(cert.get(), 2);
  set_random_serial(cert.get());
  X509_gmtime_adj(X509_getm_notBefore(cert.get()), -3600);
  X509_gmtime_adj(X509_getm_notAfter(cert.get()), static_cast<long>(validity_days) * 86400);
  X509_NAME* name = X509_get_subject_name(cert.get());
  const std::string cn(common_name);
  X509_NAME_add_entry_by_txt(name, "O", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>("faultline"), -1, -1, 0);
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>(cn.c_str()), -1, -1, 0);
  X509_set_issuer_name(cert.get(), name);
  X509_set_pubkey(cert.get(), key.get());
  add_ext(cert.get(), cert.get(), NID_basic_constraints, "critical,CA:TRUE");
  add_ext(cert.get(), cert.get(), NID_key_usage, "critical,keyCertSign,cRLSign");
  add_ext(cert.get(), cert.get(), NID_subject_key_identifier, "hash");
  if (X509_sign(cert.get(), key.get(), EVP_sha256()) == 0) fail("X509_sign");
  return CertificateAuthority(std::move(cert), std::move(key));
}

CertificateAuthority CertificateAuthority::from_pem(std::string_view cert_pem,
                                                    std::string_view key_pem) {
  X509Ptr cert = cert_from_pem(cert_pem);
  PkeyPtr key = key_from_pem(key_pem);
  if (X509_check_private_key(cert.get(), key.get()) != 1) {
    throw TlsError("CA certificate and key do not match");
  }
  return CertificateAuthority(std::move(cert), std::move(key));
}

CertificateAuthority CertificateAuthority::load_or_create(
    const std::filesystem::path& cert_path, const std::filesystem::path& key_path,
    int validity_days) {
  if (std::filesystem::exists(cert_path) && std::filesystem::exists(key_path)) {
    return from_pem(read_file(cert_path), read_file(key_path));
  }
  auto ca = generate(validity_days);
  ca.write(cert_path, key_path);
  spdlog::info("generated interception CA at {}", cert_path.string());
  return ca;
}

void CertificateAuthority::write(const std::filesystem::path& cert_path,
                                 const std::filesystem::path& key_path) const {
  write_file(key_path, key_pem_, true);
  write_file(cert_path, cert_pem_, false);
}

LeafCertificate CertificateAuthority::mint_leaf(std::string_view hostname,
                                                std::shared_ptr<EVP_PKEY> leaf_key) const {
  if (!is_valid_hostname(hostname)) {
    throw TlsError("invalid hostname for leaf certificate: '" + std::string(hostname) + "'");
  }
  const std::string host = lower(strip_brackets(hostname));
  const bool ip = is_ip_literal(host);

  X509Ptr cert(X509_new());
  if (!cert) fail("X509_new");
  X509_set_version(cert.get(), 2);
  set_random_serial(cert.get());
  X509_gmtime_adj(X509_getm_notBefore(cert.get()), -3600);
  X509_gmtime_adj(X509_getm_notAfter(cert.get()), 365L * 86400);
  X509_NAME* name = X509_get_subject_name(cert.get());
  if (host.size() <= 64) {
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>(host.c_str()), -1, -1, 0);
  }
  X509_set_issuer_name(cert.get(), X509_get_subject_name(cert_.get()));
  X509_set_pubkey(cert.get(), leaf_key.get());

  const std::string san = (ip ? "IP:" : "DNS:") + host;
  add_ext(cert.get(), cert_.get(), NID_subject_alt_name, san.c_str());
  add_ext(cert.get(), cert_.get(), NID_basic_constraints, "critical,CA:FALSE");
  add_ext(cert.get(), cert_.get(), NID_key_usage, "critical,digitalSignature,keyEncipherment");
  add_ext(cert.get(), cert_.get(), NID_ext_key_usage, "serverAuth");
  add_ext(cert.get(), cert_.get(), NID_subject_key_identifier, "hash");
  add_ext(cert.get(), cert_.get(), NID_authority_key_identifier, "keyid:always");
  if (X509_sign(cert.get(), key_.get(), EVP_sha256()) == 0) fail("X509_sign");
  return LeafCertificate{std::move(cert), std::move(leaf_key)};
}

LeafCache::LeafCache(std::shared_ptr<const CertificateAuthority> ca)
    : ca_(std::move(ca)) {
  PkeyPtr key = generate_ec_key();
  leaf_key_ = std::shared_ptr<EVP_PKEY>(key.release(), EVP_PKEY_free);
}

std::shared_ptr<const LeafCertificate> LeafCache::get(std::string_view hostname) {
  const std::string key = lower(strip_brackets(hostname));
  std::lock_guard<std::mutex> lock(mu_);
  if (auto it = leaves_.find(key); it != leaves_.end()) return it->second;
  auto leaf = std::make_shared<const LeafCertificate>(ca_->mint_leaf(hostname, leaf_key_));
  leaves_.emplace(key, leaf);
  return leaf;
}

std::size_t LeafCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return leaves_.size();
}

TlsStream::~TlsStream() { SSL_free(ssl_); }

std::size_t TlsStream::read_some(std::span<char> buffer) {
  std::size_t n = 0;
  if (SSL_read_ex(ssl_, buffer.data(), buffer.size(), &n) == 1) return n;
  const int err = SSL_get_error(ssl_, 0);
  if (err == SSL_ERROR_ZERO_RETURN) return 0;
  if (err == SSL_ERROR_SYSCALL && errno == 0) return 0;
  if (err == SSL_ERROR_SYSCALL && (errno == EAGAIN || errno == EWOULDBLOCK)) {
    throw net::NetError("read timed out");
  }
  throw net::NetError("TLS read: " + last_ssl_error());
}

void TlsStream::write_all(std::string_view data) {
  while (!data.empty()) {
    std::size_t n = 0;
    if (SSL_write_ex(ssl_, data.data(), data.size(), &n) != 1) {
      throw net::NetError("TLS write: " + last_ssl_error());
    }
    data.remove_prefix(n);
  }
}

void TlsStream::shutdown_write() {
  if (!shutdown_sent_) {
    shutdown_sent_ = true;
    SSL_shutdown(ssl_);
  }
  ::shutdown(socket_.fd(), SHUT_WR);
}

bool TlsStream::has_pending() const { return SSL_pending(ssl_) > 0; }

std::string TlsStream::sni() const {
  const char* name = SSL_get_servername(ssl_, TLSEXT_NAMETYPE_host_name);
  return name != nullptr ? std::string(name) : std::string();
}

InterceptionContext::InterceptionContext(std::shared_ptr<LeafCache> leaves)
    : leaves_(std::move(leaves)), ctx_(SSL_CTX_new(TLS_server_method())) {
  if (!ctx_) fail("SSL_CTX_new");
  SSL_CTX_set_min_proto_version(ctx_.get(), TLS1_2_VERSION);
  SSL_CTX_set_options(ctx_.get(), SSL_OP_IGNORE_UNEXPECTED_EOF);
  SSL_CTX_set_tlsext_servername_callback(ctx_.get(), &InterceptionContext::on_servername);
  SSL_CTX_set_tlsext_servername_arg(ctx_.get(), this);
}

int InterceptionContext::on_servername(SSL* ssl, int* alert, void* arg) {
  auto* self = static_cast<InterceptionContext*>(arg);
  const char* name = SSL_get_servername(ssl, TLSEXT_NAMETYPE_host_name);
  if (name == nullptr) {
    // No SNI; the fallback leaf installed before the handshake applies.
    if (SSL_get_certificate(ssl) != nullptr) return SSL_TLSEXT_ERR_OK;
    *alert = SSL_AD_UNRECOGNIZED_NAME;
    return SSL_TLSEXT_ERR_ALERT_FATAL;
  }
  try {
    auto leaf = self->leaves_->get(name);
    if (SSL_use_certificate(ssl, leaf->cert.get()) != 1 ||
        SSL_use_PrivateKey(ssl, leaf->key.get()) != 1) {
      *alert = SSL_AD_INTERNAL_ERROR;
      return SSL_TLSEXT_ERR_ALERT_FATAL;
    }
  } catch (const TlsError& e) {
    spdlog::warn("rejecting TLS client: {}", e.what());
    *alert = SSL_AD_UNRECOGNIZED_NAME;
    return SSL_TLSEXT_ERR_ALERT_FATAL;
  }
  return SSL_TLSEXT_ERR_OK;
}

std::unique_ptr<TlsStream> InterceptionContext::accept(net::Socket socket,
                                                       std::string_view fallback_host) {
  SSL* ssl = SSL_new(ctx_.get());
  if (ssl == nullptr) fail("SSL_new");
  auto stream = std::make_unique<TlsStream>(std::move(socket), ssl);
  SSL_set_fd(ssl, stream->socket().fd());
  if (is_valid_hostname(fallback_host)) {
    auto leaf = leaves_->get(fallback_host);
    SSL_use_certificate(ssl, leaf->cert.get());
    SSL_use_PrivateKey(ssl, leaf->key.get());
  }
  if (SSL_accept(ssl) != 1) fail("client TLS handshake");
  return stream;
}

UpstreamContext::UpstreamContext(const UpstreamTlsOptions& options)
    : options_(options), ctx_(SSL_CTX_new(TLS_client_method())) {
  if (!ctx_) fail("SSL_CTX_new");
  SSL_CTX_set_min_proto_version(ctx_.get(), TLS1_2_VERSION);
  SSL_CTX_set_options(ctx_.get(), SSL_OP_IGNORE_UNEXPECTED_EOF);
  if (options_.verify) {
    SSL_CTX_set_verify(ctx_.get(), SSL_VERIFY_PEER, nullptr);
    SSL_CTX_set_default_verify_paths(ctx_.get());
    if (!options_.extra_ca_path.empty() &&
        SSL_CTX_load_verify_locations(ctx_.get(), options_.extra_ca_path.c_str(), nullptr) != 1) {
      fail("loading upstream CA " + options_.extra_ca_path);
    }
  } else {
    SSL_CTX_set_verify(ctx_.get(), SSL_VERIFY_NONE, nullptr);
  }
  static const unsigned char kAlpn[] = {8, 'h', 't', 't', 'p', '/', '1', '.', '1'};
  SSL_CTX_set_alpn_protos(ctx_.get(), kAlpn, sizeof(kAlpn));
}

std::unique_ptr<TlsStream> UpstreamContext::connect(net::Socket socket,
                                                    std::string_view hostname) {
  SSL* ssl = SSL_new(ctx_.get());
  if (ssl == nullptr) fail("SSL_new");
  auto stream = std::make_unique<TlsStream>(std::move(socket), ssl);
  SSL_set_fd(ssl, stream->socket().fd());
  const std::string host = strip_brackets(hostname);
  const bool ip = is_ip_literal(host);
  if (!ip) SSL_set_tlsext_host_name(ssl, host.c_str());
  if (options_.verify) {
    if (ip) {
      X509_VERIFY_PARAM_set1_ip_asc(SSL_get0_param(ssl), host.c_str());
    } else {
      SSL_set1_host(ssl, host.c_str());
    }
  }
  if (SSL_connect(ssl) != 1) {
    const long verify = SSL_get_verify_result(ssl);
    std::string detail = last_ssl_error();
    if (verify != X509_V_OK) detail += std::string(" (") + X509_verify_cert_error_string(verify) + ")";
    throw TlsError("upstream TLS handshake with " + host + " failed: " + detail);
  }
  return stream;
}

}  // namespace faultline::tls
