package com.example.beacon;

public class Scanner {
    public void onLeScan(BluetoothDevice device, int rssi, byte[] record) {
        Log.d("beacon", device.getAddress());
    }
}
