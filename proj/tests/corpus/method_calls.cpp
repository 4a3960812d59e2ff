// Accumulator methods serialize on their receiver object.
struct Accum {
    int total;
    void reset() {
        total = 0;
    }
    void add(int v) {
        total = total + v;
    }
    int get() const {
        return total;
    }
};

int main() {
    Accum acc;
    acc.reset();
    acc.add(5);
    acc.add(9);
    return acc.get();
}
