/* Reference-codec helper for interop tests, built against the system
 * libjpeg at test time.
 *
 * Usage:
 *   jpegref encode <in.pgm> <quality> <out.jpg>
 *   jpegref coeffs <in.jpg> <out.bin>
 *   jpegref decode <in.jpg> <out.pgm>
 *
 * Coefficient dump layout (little-endian):
 *   u32 blocks_high, u32 blocks_wide,
 *   u16 quant[64] natural order,
 *   i16 coeffs[blocks_high * blocks_wide * 64] natural order, row-major.
 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <jpeglib.h>

static void die(const char *msg) {
    fprintf(stderr, "jpegref: %s\n", msg);
    exit(1);
}

static unsigned char *read_pgm(const char *path, int *w, int *h) {
    FILE *f = fopen(path, "rb");
    if (!f) die("cannot open pgm");
    int maxval;
    if (fscanf(f, "P5 %d %d %d", w, h, &maxval) != 3 || maxval != 255)
        die("bad pgm header");
    fgetc(f); /* single whitespace after maxval */
    unsigned char *buf = malloc((size_t)*w * *h);
    if (fread(buf, 1, (size_t)*w * *h, f) != (size_t)*w * *h)
        die("short pgm body");
    fclose(f);
    return buf;
}

static void cmd_encode(const char *in, int quality, const char *out) {
    int w, h;
    unsigned char *pixels = read_pgm(in, &w, &h);
    struct jpeg_compress_struct cinfo;
    struct jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    FILE *f = fopen(out, "wb");
    if (!f) die("cannot open output");
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = w;
    cinfo.image_height = h;
    cinfo.input_components = 1;
    cinfo.in_color_space = JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE /* force baseline */);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = pixels + (size_t)cinfo.next_scanline * w;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    fclose(f);
    free(pixels);
}

static void put_u32(FILE *f, unsigned v) {
    unsigned char b[4] = {v, v >> 8, v >> 16, v >> 24};
    fwrite(b, 1, 4, f);
}

static void cmd_coeffs(const char *in, const char *out) {
    FILE *f = fopen(in, "rb");
    if (!f) die("cannot open jpeg");
    struct jpeg_decompress_struct cinfo;
    struct jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.num_components != 1) die("not grayscale");
    jvirt_barray_ptr *arrays = jpeg_read_coefficients(&cinfo);
    jpeg_component_info *comp = &cinfo.comp_info[0];
    unsigned bh = comp->height_in_blocks, bw = comp->width_in_blocks;
    FILE *o = fopen(out, "wb");
    if (!o) die("cannot open dump");
    put_u32(o, bh);
    put_u32(o, bw);
    JQUANT_TBL *qt = comp->quant_table;
    for (int k = 0; k < 64; k++) {
        unsigned short q = qt->quantval[k];
        unsigned char b[2] = {q, q >> 8};
        fwrite(b, 1, 2, o);
    }
    for (unsigned by = 0; by < bh; by++) {
        JBLOCKARRAY rows = (cinfo.mem->access_virt_barray)(
            (j_common_ptr)&cinfo, arrays[0], by, 1, FALSE);
        for (unsigned bx = 0; bx < bw; bx++) {
            for (int k = 0; k < 64; k++) {
                short v = rows[0][bx][k];
                unsigned char b[2] = {v, v >> 8};
                fwrite(b, 1, 2, o);
            }
        }
    }
    fclose(o);
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    fclose(f);
}

static void cmd_decode(const char *in, const char *out) {
    FILE *f = fopen(in, "rb");
    if (!f) die("cannot open jpeg");
    struct jpeg_decompress_struct cinfo;
    struct jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_GRAYSCALE;
    jpeg_start_decompress(&cinfo);
    FILE *o = fopen(out, "wb");
    if (!o) die("cannot open output pgm");
    fprintf(o, "P5\n%d %d\n255\n", cinfo.output_width, cinfo.output_height);
    unsigned char *row = malloc(cinfo.output_width);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW r = row;
        jpeg_read_scanlines(&cinfo, &r, 1);
        fwrite(row, 1, cinfo.output_width, o);
    }
    free(row);
    fclose(o);
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    fclose(f);
}

int main(int argc, char **argv) {
    if (argc < 2) die("missing command");
    if (!strcmp(argv[1], "encode") && argc == 5)
        cmd_encode(argv[2], atoi(argv[3]), argv[4]);
    else if (!strcmp(argv[1], "coeffs") && argc == 4)
        cmd_coeffs(argv[2], argv[3]);
    else if (!strcmp(argv[1], "decode") && argc == 4)
        cmd_decode(argv[2], argv[3]);
    else
        die("usage: encode <pgm> <q> <jpg> | coeffs <jpg> <bin> | decode <jpg> <pgm>");
    return 0;
}
