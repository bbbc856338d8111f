/*
 * Reference name-service contract for the WASM contract path.
 *
 * Freestanding C, no libc. Behaves exactly like the native NameService:
 * same host calls in the same order, same storage layout, same events, same
 * error codes. Build with contracts/build.sh.
 */

typedef unsigned char u8;
typedef unsigned int u32;
typedef int i32;
typedef unsigned long long u64;

#define IMPORT(name) __attribute__((import_module("env"), import_name(#name)))
#define EXPORT(name) __attribute__((export_name(#name)))

IMPORT(storage_get) i32 storage_get(const u8* k, u32 klen, u8* v, u32 vcap);
IMPORT(storage_set) void storage_set(const u8* k, u32 klen, const u8* v, u32 vlen);
IMPORT(nn_build_from_cache) i32 nn_build_from_cache(const u8* id, u32 idlen);
IMPORT(nn_init_ctx) i32 nn_init_ctx(i32 graph, u32 seed_lo, u32 seed_hi, u32 mode, u32 max_tokens);
IMPORT(nn_set_input) i32 nn_set_input(i32 ctx, u32 idx, const u8* p, u32 len);
IMPORT(nn_compute) i32 nn_compute(i32 ctx);
IMPORT(nn_get_output) i32 nn_get_output(i32 ctx, u32 idx, u8* p, u32 cap);

#define MAX_NAME 64
#define MAX_VALUE 256
#define MAX_TOKENS 256
#define OUTPUT_CAP 1000

/* ---- memory ------------------------------------------------------------ */

static u8 heap[1 << 16];
static u32 heap_top;

EXPORT(allocate) u8* allocate(u32 size) {
  u32 aligned = (heap_top + 7u) & ~7u;
  if (size > sizeof(heap) || aligned > sizeof(heap) - size) __builtin_trap();
  heap_top = aligned + size;
  return heap + aligned;
}

static void copy(u8* dst, const u8* src, u32 n) { __builtin_memcpy(dst, src, n); }

static u32 cstr_len(const char* s) {
  u32 n = 0;
  while (s[n]) ++n;
  return n;
}

static int bytes_eq(const u8* a, u32 alen, const char* b) {
  u32 blen = cstr_len(b);
  if (alen != blen) return 0;
  for (u32 i = 0; i < alen; ++i)
    if (a[i] != (u8)b[i]) return 0;
  return 1;
}

/* ---- growable output buffer ------------------------------------------- */

typedef struct {
  u8 data[8192];
  u32 len;
} buf_t;

static void put(buf_t* b, const u8* p, u32 n) {
  if (n > sizeof(b->data) - b->len) __builtin_trap();
  copy(b->data + b->len, p, n);
  b->len += n;
}

static void puts_(buf_t* b, const char* s) { put(b, (const u8*)s, cstr_len(s)); }

static void put_json_string(buf_t* b, const u8* s, u32 n) {
  static const char hex[] = "0123456789abcdef";
  puts_(b, "\"");
  for (u32 i = 0; i < n; ++i) {
    u8 c = s[i];
    if (c == '"' || c == '\\') {
      u8 esc[2] = {'\\', c};
      put(b, esc, 2);
    } else if (c < 0x20) {
      u8 esc[6] = {'\\', 'u', '0', '0', (u8)hex[c >> 4], (u8)hex[c & 15]};
      put(b, esc, 6);
    } else {
      put(b, &c, 1);
    }
  }
  puts_(b, "\"");
}

static u32 format_u32(u32 v, u8* out) {
  u8 tmp[10];
  u32 n = 0;
  do {
    tmp[n++] = (u8)('0' + v % 10);
    v /= 10;
  } while (v);
  for (u32 i = 0; i < n; ++i) out[i] = tmp[n - 1 - i];
  return n;
}

static buf_t result;

static u8* finish(void) {
  static u8 framed[4 + sizeof(result.data)];
  framed[0] = (u8)result.len;
  framed[1] = (u8)(result.len >> 8);
  framed[2] = (u8)(result.len >> 16);
  framed[3] = (u8)(result.len >> 24);
  copy(framed + 4, result.data, result.len);
  return framed;
}

static u8* fail(const char* code) {
  result.len = 0;
  puts_(&result, "{\"error\":\"");
  puts_(&result, code);
  puts_(&result, "\"}");
  return finish();
}

/* ---- sha256 ------------------------------------------------------------ */

typedef struct {
  u32 h[8];
  u8 block[64];
  u32 used;
  u64 total;
} sha256_t;

static const u32 K[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

static u32 rotr(u32 x, u32 n) { return (x >> n) | (x << (32 - n)); }

static void sha256_block(sha256_t* s) {
  u32 w[64];
  for (u32 i = 0; i < 16; ++i)
    w[i] = (u32)s->block[4 * i] << 24 | (u32)s->block[4 * i + 1] << 16 | (u32)s->block[4 * i + 2] << 8 |
           (u32)s->block[4 * i + 3];
  for (u32 i = 16; i < 64; ++i) {
    u32 s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
    u32 s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
    w[i] = w[i - 16] + s0 + w[i - 7] + s1;
  }
  u32 a = s->h[0], b = s->h[1], c = s->h[2], d = s->h[3], e = s->h[4], f = s->h[5], g = s->h[6], h = s->h[7];
  for (u32 i = 0; i < 64; ++i) {
    u32 t1 = h + (rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25)) + ((e & f) ^ (~e & g)) + K[i] + w[i];
    u32 t2 = (rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22)) + ((a & b) ^ (a & c) ^ (b & c));
    h = g;
    g = f;
    f = e;
    e = d + t1;
    d = c;
    c = b;
    b = a;
    a = t1 + t2;
  }
  s->h[0] += a; s->h[1] += b; s->h[2] += c; s->h[3] += d;
  s->h[4] += e; s->h[5] += f; s->h[6] += g; s->h[7] += h;
}

static void sha256_init(sha256_t* s) {
  static const u32 iv[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                            0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  for (u32 i = 0; i < 8; ++i) s->h[i] = iv[i];
  s->used = 0;
  s->total = 0;
}

static void sha256_update(sha256_t* s, const u8* p, u32 n) {
  for (u32 i = 0; i < n; ++i) {
    s->block[s->used++] = p[i];
    if (s->used == 64) {
      sha256_block(s);
      s->used = 0;
    }
  }
  s->total += n;
}

static void sha256_final(sha256_t* s, u8 out[32]) {
  u64 bits = s->total * 8;
  u8 pad = 0x80;
  sha256_update(s, &pad, 1);
  u8 zero = 0;
  while (s->used != 56) sha256_update(s, &zero, 1);
  u8 len[8];
  for (u32 i = 0; i < 8; ++i) len[i] = (u8)(bits >> (56 - 8 * i));
  sha256_update(s, len, 8);
  for (u32 i = 0; i < 8; ++i) {
    out[4 * i] = (u8)(s->h[i] >> 24);
    out[4 * i + 1] = (u8)(s->h[i] >> 16);
    out[4 * i + 2] = (u8)(s->h[i] >> 8);
    out[4 * i + 3] = (u8)s->h[i];
  }
}

static void to_hex(const u8* in, u32 n, u8* out) {
  static const char hex[] = "0123456789abcdef";
  for (u32 i = 0; i < n; ++i) {
    out[2 * i] = (u8)hex[in[i] >> 4];
    out[2 * i + 1] = (u8)hex[in[i] & 15];
  }
}

/* ---- JSON reading (just enough for the canonical envelope) -------------- */

typedef struct {
  const u8* p;
  const u8* end;
} cur_t;

static void skip_ws(cur_t* c) {
  while (c->p < c->end && (*c->p == ' ' || *c->p == '\n' || *c->p == '\r' || *c->p == '\t')) ++c->p;
}

static int hexval(u8 ch) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
  return -1;
}

static int read_hex4(cur_t* c, u32* out) {
  if (c->end - c->p < 4) return 0;
  u32 v = 0;
  for (int i = 0; i < 4; ++i) {
    int h = hexval(c->p[i]);
    if (h < 0) return 0;
    v = v << 4 | (u32)h;
  }
  c->p += 4;
  *out = v;
  return 1;
}

static int emit_utf8(u32 cp, u8* out, u32 cap, u32* len) {
  u8 tmp[4];
  u32 n;
  if (cp < 0x80) { tmp[0] = (u8)cp; n = 1; }
  else if (cp < 0x800) { tmp[0] = (u8)(0xC0 | cp >> 6); tmp[1] = (u8)(0x80 | (cp & 0x3F)); n = 2; }
  else if (cp < 0x10000) {
    tmp[0] = (u8)(0xE0 | cp >> 12); tmp[1] = (u8)(0x80 | ((cp >> 6) & 0x3F)); tmp[2] = (u8)(0x80 | (cp & 0x3F)); n = 3;
  } else {
    tmp[0] = (u8)(0xF0 | cp >> 18); tmp[1] = (u8)(0x80 | ((cp >> 12) & 0x3F));
    tmp[2] = (u8)(0x80 | ((cp >> 6) & 0x3F)); tmp[3] = (u8)(0x80 | (cp & 0x3F)); n = 4;
  }
  if (*len + n > cap) return 0;
  copy(out + *len, tmp, n);
  *len += n;
  return 1;
}

/* Decodes a JSON string into out. Returns 0 on malformed input or overflow. */
static int read_string(cur_t* c, u8* out, u32 cap, u32* len) {
  skip_ws(c);
  if (c->p >= c->end || *c->p != '"') return 0;
  ++c->p;
  *len = 0;
  while (c->p < c->end) {
    u8 ch = *c->p++;
    if (ch == '"') return 1;
    if (ch != '\\') {
      if (*len >= cap) return 0;
      out[(*len)++] = ch;
      continue;
    }
    if (c->p >= c->end) return 0;
    u8 e = *c->p++;
    u32 cp;
    switch (e) {
      case '"': cp = '"'; break;
      case '\\': cp = '\\'; break;
      case '/': cp = '/'; break;
      case 'b': cp = 8; break;
      case 'f': cp = 12; break;
      case 'n': cp = 10; break;
      case 'r': cp = 13; break;
      case 't': cp = 9; break;
      case 'u':
        if (!read_hex4(c, &cp)) return 0;
        if (cp >= 0xD800 && cp < 0xDC00) {
          u32 lo;
          if (c->end - c->p < 2 || c->p[0] != '\\' || c->p[1] != 'u') return 0;
          c->p += 2;
          if (!read_hex4(c, &lo) || lo < 0xDC00 || lo >= 0xE000) return 0;
          cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
        }
        break;
      default: return 0;
    }
    if (!emit_utf8(cp, out, cap, len)) return 0;
  }
  return 0;
}

static int skip_value(cur_t* c);

static int skip_container(cur_t* c, u8 close) {
  ++c->p;
  skip_ws(c);
  if (c->p < c->end && *c->p == close) { ++c->p; return 1; }
  while (c->p < c->end) {
    if (close == '}') {
      static u8 scratch[1024];
      u32 n;
      if (!read_string(c, scratch, sizeof(scratch), &n)) return 0;
      skip_ws(c);
      if (c->p >= c->end || *c->p != ':') return 0;
      ++c->p;
    }
    if (!skip_value(c)) return 0;
    skip_ws(c);
    if (c->p >= c->end) return 0;
    if (*c->p == ',') { ++c->p; continue; }
    if (*c->p == close) { ++c->p; return 1; }
    return 0;
  }
  return 0;
}

static int skip_value(cur_t* c) {
  skip_ws(c);
  if (c->p >= c->end) return 0;
  u8 ch = *c->p;
  if (ch == '{') return skip_container(c, '}');
  if (ch == '[') return skip_container(c, ']');
  if (ch == '"') {
    static u8 scratch[1024];
    u32 n;
    return read_string(c, scratch, sizeof(scratch), &n);
  }
  while (c->p < c->end && *c->p != ',' && *c->p != '}' && *c->p != ']') ++c->p;
  return 1;
}

/* Positions `out` at the value of `key` inside the object at c. */
static int find_key(cur_t c, const char* key, cur_t* out) {
  skip_ws(&c);
  if (c.p >= c.end || *c.p != '{') return 0;
  ++c.p;
  while (1) {
    static u8 name[256];
    u32 n;
    skip_ws(&c);
    if (c.p < c.end && *c.p == '}') return 0;
    if (!read_string(&c, name, sizeof(name), &n)) return 0;
    skip_ws(&c);
    if (c.p >= c.end || *c.p != ':') return 0;
    ++c.p;
    skip_ws(&c);
    if (bytes_eq(name, n, key)) {
      *out = c;
      return 1;
    }
    if (!skip_value(&c)) return 0;
    skip_ws(&c);
    if (c.p < c.end && *c.p == ',') { ++c.p; continue; }
    return 0;
  }
}

static int read_u64(cur_t c, u64* out) {
  skip_ws(&c);
  u64 v = 0;
  int digits = 0;
  while (c.p < c.end && *c.p >= '0' && *c.p <= '9') {
    u64 d = (u64)(*c.p++ - '0');
    if (v > (~0ull - d) / 10) return 0;
    v = v * 10 + d;
    ++digits;
  }
  if (!digits) return 0;
  *out = v;
  return 1;
}

static int field_string(cur_t obj, const char* key, u8* out, u32 cap, u32* len) {
  cur_t v;
  return find_key(obj, key, &v) && read_string(&v, out, cap, len);
}

/* ---- contract ------------------------------------------------------------ */

static int valid_name(const u8* s, u32 n) {
  if (n == 0 || n > MAX_NAME) return 0;
  for (u32 i = 0; i < n; ++i) {
    u8 ch = s[i];
    if (!((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '-')) return 0;
  }
  return 1;
}

static const char* status_error(i32 status) {
  if (status < 0) status = -status;
  switch (status) {
    case 1: return "InvalidState";
    case 2: return "InvalidIndex";
    case 3: return "ModelNotFound";
    default: return "EngineFailure";
  }
}

static u32 prefixed(u8* out, const char* prefix, const u8* name, u32 n) {
  u32 p = cstr_len(prefix);
  copy(out, (const u8*)prefix, p);
  copy(out + p, name, n);
  return p + n;
}

static void event(int first, const char* key, const u8* v, u32 vlen) {
  if (!first) puts_(&result, ",");
  puts_(&result, "[");
  put_json_string(&result, (const u8*)key, cstr_len(key));
  puts_(&result, ",");
  put_json_string(&result, v, vlen);
  puts_(&result, "]");
}

static void begin_events(void) {
  result.len = 0;
  puts_(&result, "{\"events\":[");
}

static u8* end_events(void) {
  puts_(&result, "]}");
  return finish();
}

static u8 name[MAX_NAME + 1];
static u32 name_len;
static u8 value[1024];
static u32 value_len;
static u8 key[128];
static u8 prompt[2048];
static u8 output[OUTPUT_CAP];

static u8* do_register(cur_t body) {
  if (!field_string(body, "name", name, sizeof(name), &name_len) ||
      !field_string(body, "value", value, sizeof(value), &value_len)) {
    if (name_len > MAX_NAME) return fail("InvalidName");
    return fail("InvalidMessage");
  }
  if (!valid_name(name, name_len)) return fail("InvalidName");
  if (value_len > MAX_VALUE) return fail("InvalidMessage");
  u32 klen = prefixed(key, "name/", name, name_len);
  storage_set(key, klen, value, value_len);
  begin_events();
  event(1, "action", (const u8*)"register", 8);
  event(0, "name", name, name_len);
  return end_events();
}

static u8* do_resolve(cur_t body) {
  if (!field_string(body, "name", name, sizeof(name), &name_len)) return fail("InvalidName");
  if (!valid_name(name, name_len)) return fail("InvalidName");
  u32 klen = prefixed(key, "name/", name, name_len);
  i32 n = storage_get(key, klen, value, sizeof(value));
  if (n < 0) return fail("NameNotFound");
  begin_events();
  event(1, "action", (const u8*)"resolve", 7);
  event(0, "name", name, name_len);
  event(0, "value", value, (u32)n);
  return end_events();
}

static u8* do_infer(cur_t body, u8* chain_id, u32 chain_id_len, u64 height, const u8 tx_hash[32]) {
  static u8 model_id[256];
  static u8 mode[16];
  u32 model_id_len, mode_len;
  u64 max_tokens;
  cur_t v;
  if (!field_string(body, "name", name, sizeof(name), &name_len)) return fail("InvalidName");
  if (!valid_name(name, name_len)) return fail("InvalidName");
  if (!find_key(body, "max_tokens", &v) || !read_u64(v, &max_tokens)) return fail("InvalidMessage");
  if (max_tokens < 1 || max_tokens > MAX_TOKENS) return fail("InvalidMessage");
  if (!field_string(body, "mode", mode, sizeof(mode), &mode_len)) return fail("InvalidMessage");
  u32 sampled;
  if (bytes_eq(mode, mode_len, "greedy")) sampled = 0;
  else if (bytes_eq(mode, mode_len, "sampled")) sampled = 1;
  else return fail("InvalidMessage");
  if (!field_string(body, "model_id", model_id, sizeof(model_id), &model_id_len)) return fail("InvalidMessage");

  u32 klen = prefixed(key, "name/", name, name_len);
  i32 n = storage_get(key, klen, value, sizeof(value));
  if (n < 0) return fail("NameNotFound");
  value_len = (u32)n;

  u32 plen = prefixed(prompt, "name:", name, name_len);
  copy(prompt + plen, (const u8*)" value:", 7);
  plen += 7;
  copy(prompt + plen, value, value_len);
  plen += value_len;

  /* beacon: sha256(chain_id || u64le(height) || tx_hash), first 8 bytes LE */
  sha256_t s;
  u8 digest[32];
  u8 height_le[8];
  for (u32 i = 0; i < 8; ++i) height_le[i] = (u8)(height >> (8 * i));
  sha256_init(&s);
  sha256_update(&s, chain_id, chain_id_len);
  sha256_update(&s, height_le, 8);
  sha256_update(&s, tx_hash, 32);
  sha256_final(&s, digest);
  u64 seed = 0;
  for (u32 i = 8; i-- > 0;) seed = seed << 8 | digest[i];

  i32 graph = nn_build_from_cache(model_id, model_id_len);
  if (graph < 0) return fail(status_error(graph));
  i32 ctx = nn_init_ctx(graph, (u32)seed, (u32)(seed >> 32), sampled, (u32)max_tokens);
  if (ctx < 0) return fail(status_error(ctx));
  i32 st = nn_set_input(ctx, 0, prompt, plen);
  if (st != 0) return fail(status_error(st));
  st = nn_compute(ctx);
  if (st != 0) return fail(status_error(st));
  i32 written = nn_get_output(ctx, 0, output, OUTPUT_CAP);
  if (written < 0) return fail(status_error(written));

  u8 hex[64];
  sha256_init(&s);
  sha256_update(&s, output, (u32)written);
  sha256_final(&s, digest);
  to_hex(digest, 32, hex);
  klen = prefixed(key, "infer/", name, name_len);
  storage_set(key, klen, hex, 64);

  u8 count[10];
  u32 count_len = format_u32((u32)written, count);
  begin_events();
  event(1, "action", (const u8*)"infer_from_name", 15);
  event(0, "name", name, name_len);
  event(0, "output_bytes", count, count_len);
  event(0, "digest", hex, 64);
  return end_events();
}

EXPORT(execute) u8* execute(const u8* input, u32 len) {
  cur_t root = {input, input + len};
  cur_t block, msg, v;
  static u8 chain_id[256];
  u32 chain_id_len;
  u64 height;
  u8 tx_hex[64];
  u32 tx_hex_len;
  u8 tx_hash[32];

  name_len = 0;
  if (!find_key(root, "block", &block) || !find_key(root, "msg", &msg)) return fail("InvalidMessage");
  if (!field_string(block, "chain_id", chain_id, sizeof(chain_id), &chain_id_len)) return fail("InvalidMessage");
  if (!find_key(block, "height", &v) || !read_u64(v, &height)) return fail("InvalidMessage");
  if (!field_string(block, "tx_hash", tx_hex, sizeof(tx_hex), &tx_hex_len) || tx_hex_len != 64)
    return fail("InvalidMessage");
  for (u32 i = 0; i < 32; ++i) {
    int hi = hexval(tx_hex[2 * i]), lo = hexval(tx_hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return fail("InvalidMessage");
    tx_hash[i] = (u8)(hi << 4 | lo);
  }

  if (find_key(msg, "register", &v)) return do_register(v);
  if (find_key(msg, "resolve", &v)) return do_resolve(v);
  if (find_key(msg, "infer_from_name", &v)) return do_infer(v, chain_id, chain_id_len, height, tx_hash);
  return fail("InvalidMessage");
}
