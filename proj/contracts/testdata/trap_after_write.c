/* Writes one key and then traps, so nothing may be committed. */
typedef unsigned int u32;
typedef unsigned char u8;

__attribute__((import_module("env"), import_name("storage_set")))
void storage_set(const u8* k, u32 klen, const u8* v, u32 vlen);

static u8 heap[4096];

__attribute__((export_name("allocate"))) u8* allocate(u32 size) {
  (void)size;
  return heap;
}

__attribute__((export_name("execute"))) u8* execute(const u8* p, u32 len) {
  (void)p;
  (void)len;
  storage_set((const u8*)"k", 1, (const u8*)"v", 1);
  __builtin_trap();
}
