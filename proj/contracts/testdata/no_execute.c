/* Exports allocate but not execute. */
typedef unsigned int u32;
typedef unsigned char u8;

static u8 heap[4096];

__attribute__((export_name("allocate"))) u8* allocate(u32 size) {
  (void)size;
  return heap;
}
