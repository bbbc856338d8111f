/* Never returns; exercises the fuel limit. */
typedef unsigned int u32;
typedef unsigned char u8;

static u8 heap[4096];

__attribute__((export_name("allocate"))) u8* allocate(u32 size) {
  (void)size;
  return heap;
}

__attribute__((export_name("execute"))) u8* execute(const u8* p, u32 len) {
  volatile u32 x = len;
  while (x != 0xffffffffu || p) x = x * 3 + 1;
  return heap;
}
