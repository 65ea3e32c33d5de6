#include <stdio.h>
#include "cga.h"

int main(void) {
    CgaPoint pts[] = {{127, 15, 158, 82, 73, 67}, {127, 14, 157, 90, 80, 70}, {126, 15, 157, 10, 20, 30}};
    CgaCloud *cloud = NULL;
    if (cga_cloud_build(pts, 3, 10, true, &cloud, NULL) != CGA_STATUS_OK) {
        fprintf(stderr, "build: %s\n", cga_last_error());
        return 1;
    }
    CgaPoint hit;
    uint64_t d2;
    cga_cloud_nearest(cloud, 127, 16, 158, &hit, &d2, NULL);
    printf("nearest %u,%u,%u d2=%llu\n", hit.x, hit.y, hit.z, (unsigned long long)d2);
    cga_cloud_free(cloud);
    return 0;
}
