#include <stdio.h>
#include "mvtda.h"

/* 5x5 ring (10) around a 3x3 interior (2), between two solid frames. */
int main(void) {
    double v[100];
    for (int o = 0; o < 4; o++)
        for (int r = 0; r < 5; r++)
            for (int c = 0; c < 5; c++) {
                int inner = r > 0 && r < 4 && c > 0 && c < 4;
                v[o * 25 + r * 5 + c] = (o == 1 || o == 2) && inner ? 2.0 : 10.0;
            }
    size_t dims[3] = {5, 5, 4};
    MvStack *st = NULL;
    if (mvtda_stack_new(dims, 3, v, 100, 1.0, &st) != MV_STATUS_OK) return 1;

    MvDiagram *pd = NULL;
    if (mvtda_persistence(st, 2, &pd) != MV_STATUS_OK) return 2;
    int voids = 0;
    for (size_t i = 0; i < mvtda_diagram_len(pd); i++) {
        MvPoint p;
        mvtda_diagram_get(pd, i, &p);
        if (p.dim == 2 && p.birth != p.death) voids += p.birth == 10.0 && p.death == 2.0 ? 1 : 100;
    }
    if (voids != 1) return 3;

    MvZigzag *zz = NULL;
    if (mvtda_zigzag(st, 5.0, MV_SET_OP_UNION, &zz) != MV_STATUS_OK) return 4;
    int loops = 0;
    for (size_t i = 0; i < mvtda_zigzag_len(zz); i++) {
        MvInterval iv;
        mvtda_zigzag_get(zz, i, &iv);
        if (iv.dim == 1 && iv.birth_index == 3 && iv.death_index == 5) loops++;
    }
    if (loops != 1) return 5;

    MvStack *bad = NULL;
    size_t zero[1] = {0};
    if (mvtda_stack_new(zero, 1, v, 0, 1.0, &bad) != MV_STATUS_INVALID_INPUT) return 6;
    if (mvtda_last_error() == NULL) return 7;

    printf("ok %s\n", mvtda_version());
    mvtda_zigzag_free(zz);
    mvtda_diagram_free(pd);
    mvtda_stack_free(st);
    return 0;
}
