namespace heaplab {}
