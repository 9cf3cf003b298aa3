#include <math.h>
#include <stdio.h>
#include <string.h>

#include "subseg.h"

int main(void) {
    uint8_t red[3] = {255, 0, 0};
    double lab[3];
    if (subseg_srgb_to_lab(red, lab) != SUBSEG_STATUS_OK) return 1;
    if (fabs(lab[0] - 53.24) > 0.1) return 2;

    uint8_t img[16 * 16 * 3];
    memset(img, 90, sizeof img);
    SubsegSlicParams params = subseg_slic_default_params();
    params.k = 4;
    SubsegLabelMap *map = NULL;
    if (subseg_slic_segment(img, 16, 16, NULL, params, &map) != SUBSEG_STATUS_OK) return 3;
    if (subseg_label_map_num_segments(map) != 4) return 4;
    subseg_label_map_free(map);

    SubsegMetrics m;
    if (subseg_compute_metrics(0, 0, 0, 0, &m) != SUBSEG_STATUS_DATA_ERROR) return 5;
    if (subseg_last_error() == NULL) return 6;
    printf("ok\n");
    return 0;
}
