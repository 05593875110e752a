namespace coland {}
