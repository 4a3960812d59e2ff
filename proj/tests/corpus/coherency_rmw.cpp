// Host read-modify-writes interleave task mutations of the same variable;
// taskwaits keep the host view coherent.
void bump(int& v) {
    v += 1;
}

int main() {
    int var = 5;
    bump(var);
    var += 1;
    bump(var);
    var += 2;
    return var;
}
